import os
import sys
import tempfile
from pathlib import Path

import pytest

# Project root on the path, as main.py does
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from model.instance_model import Instance, Job, Model, gen_random  # noqa: E402
from scheduler.energy_min import Grids  # noqa: E402


# Test data fixtures
@pytest.fixture
def two_job_instance():
    """A(r=0, p=1) and B(r=0, p=2) on one machine."""
    return Instance(machines=1, jobs=(
        Job(id=0, release=0.0, proc=(1.0,)),
        Job(id=1, release=0.0, proc=(2.0,)),
    ))


@pytest.fixture
def six_unit_jobs():
    """Six unit jobs released together on one machine, ids 1..6."""
    return Instance(machines=1, jobs=tuple(Job(id=k, release=0.0, proc=(1.0,)) for k in range(1, 7)))


@pytest.fixture
def overlapping_energy_instance():
    """Two unit jobs sharing the window [0, 2] on one machine."""
    return Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0, jobs=(
        Job(id=0, release=0.0, proc=(1.0,), deadline=2.0),
        Job(id=1, release=0.0, proc=(1.0,), deadline=2.0),
    ))


@pytest.fixture
def unit_grid():
    """Speed 1 only, unit time step."""
    return Grids(speeds=(1.0,), time_step=1.0)


@pytest.fixture
def flow_corpus():
    """Seeded single-machine flow instances."""
    return [gen_random(seed, n=6, m=1, horizon=10.0) for seed in range(15)]


@pytest.fixture
def flow_energy_corpus():
    """Seeded weighted instances for the flow+energy engine."""
    corpus = []
    for alpha in (2.0, 3.0):
        for seed in range(8):
            corpus.append(gen_random(seed, n=6, m=1 + seed % 2, w_range=(1.0, 5.0), horizon=10.0,
                                     model=Model.FLOW_ENERGY, alpha=alpha))
    return corpus


@pytest.fixture
def mock_config(tmp_path):
    """Mock configuration for testing."""
    return {
        'experiment': {
            'eps': 0.5,
            'alpha': 2.0,
            'seed': 0,
            'n': 5,
            'm': 1,
            'p_range': [1.0, 4.0],
            'w_range': [1.0, 3.0],
            'horizon': 8.0,
            'max_brute': 6,
            'energy_cap': 100000,
            'max_configs': 2000,
            'grid_points': 4,
            'smoothness_trials': 200,
            'scope': 'all',
        },
        'generator': {
            'time_step': 1.0,
            'deadline_slack': [1.0, 2.0],
        },
        'rejection': {
            'rule1': True,
            'rule2': True,
        },
        'sweep': {
            'eps': [1.0, 0.5],
            'alpha': [2.0],
            'L': [4.0, 16.0],
            'instances': 2,
            'threads': 2,
        },
        'energy': {
            'grid': str(tmp_path / 'missing_grid.json'),
        },
        'output': {
            'directory': str(tmp_path / 'results'),
        },
        'logging': {
            'level': 'DEBUG',
            'log_dir': str(tmp_path / 'log'),
            'max_file_size': '1MB',
            'backup_count': 1,
            'files': {
                'main': str(tmp_path / 'log' / 'main.log'),
            },
        },
    }


@pytest.fixture
def temp_config_file(mock_config):
    """Create a temporary config file for testing."""
    import yaml

    with tempfile.NamedTemporaryFile(mode='w', suffix='.yaml', delete=False) as f:
        yaml.dump(mock_config, f)
        temp_file = f.name

    yield temp_file

    # Cleanup
    if os.path.exists(temp_file):
        os.unlink(temp_file)


@pytest.fixture(autouse=True)
def setup_test_environment(tmp_path, monkeypatch):
    """Keep log files and thread caps of every test inside its temp directory."""
    monkeypatch.setenv('REJECTSCHED_LOG_DIR', str(tmp_path / 'log'))
    monkeypatch.delenv('REJECTSCHED_THREADS', raising=False)
    yield
