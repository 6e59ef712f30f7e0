import json

import numpy as np
import pytest

from model.instance_model import Instance, Job, Model, gen_random
from scheduler.energy_min import (
    GreedyEnergyScheduler, Grids, LoadProfile, PowerFunction, Strategy, _smoothness_ratio,
    build_speed_grid, default_mu, energy_ratio_bound, enumerate_strategies, greedy_assign, marginal_energy,
    smoothness_lambda_estimate,
)
from utils.errors import GridError, ModelMismatchError


def deadline_job(job_id, release, deadline, *proc):
    return Job(id=job_id, release=release, proc=tuple(proc), deadline=deadline)


class TestGrids:
    """Test cases for speed and time grids."""

    def test_geometric_speed_grid(self):
        """Test consecutive speeds differ by (1+eps)^(1/(alpha-1))."""
        assert build_speed_grid(1.0, 8.0, 1.0, 2.0) == [1.0, 2.0, 4.0, 8.0]

    def test_speed_grid_caps_at_v_max(self):
        """Test that v_max is always the last speed."""
        speeds = build_speed_grid(1.0, 5.0, 1.0, 2.0)
        assert speeds == [1.0, 2.0, 4.0, 5.0]

    def test_from_dict_geometric(self):
        """Test the v_min/v_max grid-file form."""
        grids = Grids.from_dict({'v_min': 1, 'v_max': 4, 'eps_disc': 1, 'time_step': 0.5}, alpha=2.0)
        assert grids.speeds == (1.0, 2.0, 4.0)
        assert grids.time_step == 0.5

    def test_from_file(self, tmp_path):
        """Test loading a grid file."""
        path = tmp_path / 'grid.json'
        path.write_text(json.dumps({'speeds': [2, 1], 'time_step': 1}))
        grids = Grids.from_file(path)
        assert grids.speeds == (1.0, 2.0)
        assert Grids.from_dict(grids.to_dict()) == grids

    def test_invalid_grids(self):
        """Test grid validation."""
        with pytest.raises(GridError):
            Grids(speeds=(), time_step=1.0)
        with pytest.raises(GridError):
            Grids(speeds=(1.0,), time_step=0.0)
        with pytest.raises(GridError):
            Grids.from_dict({'speeds': [1.0]})

    def test_start_times(self):
        """Test grid start times inside a window."""
        grids = Grids(speeds=(1.0,), time_step=1.0)
        assert grids.start_times(0.5, 3.0) == [1.0, 2.0, 3.0]
        assert grids.start_times(0.0, 1.0) == [0.0, 1.0]

    def test_compatibility_check(self):
        """Test off-grid durations and the suggested step."""
        instance = Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0,
                            jobs=(deadline_job(0, 0.0, 6.0, 3.0),))
        offending, step = Grids(speeds=(1.0, 2.0), time_step=1.0).check_compatibility(instance)
        assert offending == [(0, 0, 2.0)]
        assert step == pytest.approx(1.5)


class TestStrategies:
    """Test cases for strategy enumeration and marginal energy."""

    def test_enumeration(self):
        """Test p=1 in window [0, 1] with speeds {1, 2} and step 0.5."""
        grids = Grids(speeds=(1.0, 2.0), time_step=0.5)
        strategies = enumerate_strategies(deadline_job(0, 0.0, 1.0, 1.0), grids)
        assert [(s.start, s.speed) for s in strategies] == [(0.0, 1.0), (0.0, 2.0), (0.5, 2.0)]

    def test_infeasible_window(self):
        """Test a window shorter than p/max speed."""
        with pytest.raises(GridError):
            enumerate_strategies(deadline_job(0, 0.0, 1.0, 4.0), Grids(speeds=(1.0, 2.0), time_step=0.5))

    def test_two_machines_double(self):
        """Test identical machines double the strategy count."""
        grids = Grids(speeds=(1.0, 2.0), time_step=0.5)
        single = enumerate_strategies(deadline_job(0, 0.0, 1.0, 1.0), grids)
        double = enumerate_strategies(deadline_job(0, 0.0, 1.0, 1.0, 1.0), grids)
        assert len(double) == 2 * len(single)

    def test_marginal_on_empty_machine(self):
        """Test P=s^2, v=2 for duration 2 on an idle machine."""
        power = PowerFunction.power_law(2.0)
        strategy = Strategy(machine=0, job=0, start=0.0, speed=2.0, end=2.0)
        assert marginal_energy(strategy, LoadProfile(1), power) == pytest.approx(8.0)

    def test_marginal_on_loaded_machine(self):
        """Test u=1 under the whole interval."""
        power = PowerFunction.power_law(2.0)
        load = LoadProfile.from_strategies(1, [Strategy(machine=0, job=9, start=0.0, speed=1.0, end=2.0)])
        strategy = Strategy(machine=0, job=0, start=0.0, speed=2.0, end=2.0)
        assert marginal_energy(strategy, load, power) == pytest.approx(16.0)

    def test_zero_speed_marginal(self):
        """Test that a zero-speed strategy costs nothing."""
        power = PowerFunction.power_law(2.0)
        strategy = Strategy(machine=0, job=0, start=0.0, speed=0.0, end=2.0)
        assert marginal_energy(strategy, LoadProfile(1), power) == 0.0

    def test_power_table(self):
        """Test the interpolated power table."""
        power = PowerFunction.from_table([1.0, 2.0], [1.0, 4.0])
        assert power(0.0) == pytest.approx(0.0)
        assert power(1.5) == pytest.approx(2.5)
        assert power(3.0) == pytest.approx(7.0)
        assert power(np.array([0.5, 2.0])) == pytest.approx([0.5, 4.0])


class TestSmoothness:
    """Test cases for the smoothness estimate."""

    def test_single_witness(self):
        """Test a=(1), b=(1) under P=s^2, mu=1/2."""
        power = PowerFunction.power_law(2.0)
        assert _smoothness_ratio(power, np.array([1.0]), np.array([1.0]), 0.5) == pytest.approx(2.5)

    def test_quadratic_estimate(self):
        """Test the estimate for P=s^2 lies between the witness and the analytic value."""
        estimate = smoothness_lambda_estimate(PowerFunction.power_law(2.0), trials=500, seed=0, mu=0.5)
        assert 2.5 <= estimate <= 3.0 + 1e-9

    def test_linear_power(self):
        """Test that linear power is (1, 0)-smooth."""
        estimate = smoothness_lambda_estimate(PowerFunction.power_law(1.0), trials=200, seed=1, mu=0.0)
        assert estimate <= 1.0 + 1e-9

    def test_ratio_bound(self):
        """Test lambda/(1-mu) for the quadratic supremum."""
        assert energy_ratio_bound(3.0, 0.5) == pytest.approx(6.0)
        assert energy_ratio_bound(1.0, 0.0) == pytest.approx(1.0)

    def test_seeded(self):
        """Test that the estimate is deterministic in its seed."""
        power = PowerFunction.power_law(3.0)
        assert smoothness_lambda_estimate(power, trials=100, seed=4, mu=default_mu(3.0)) == \
            smoothness_lambda_estimate(power, trials=100, seed=4, mu=default_mu(3.0))


class TestGreedyAssign:
    """Test cases for the greedy energy engine."""

    def test_cheapest_speed(self):
        """Test a window exactly p long at speed 1."""
        instance = Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0,
                            jobs=(deadline_job(0, 0.0, 2.0, 2.0),))
        trace, duals = greedy_assign(instance, Grids(speeds=(1.0, 2.0), time_step=1.0), lam=3.0)
        assert trace.records[0].speed == 1.0
        assert trace.objective == pytest.approx(2.0)

    def test_overlapping_jobs_staggered(self, overlapping_energy_instance, unit_grid):
        """Test the second job avoids the first one's slot."""
        trace, duals = greedy_assign(overlapping_energy_instance, unit_grid, lam=3.0)
        assert trace.records[0].start == 0.0
        assert trace.records[1].start == 1.0
        assert trace.objective == pytest.approx(2.0)
        assert duals.delta == pytest.approx({0: 1.0 / 3.0, 1: 1.0 / 3.0})

    def test_disjoint_windows_additive(self, unit_grid):
        """Test independent jobs add their energies."""
        instance = Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0, jobs=(
            deadline_job(0, 0.0, 2.0, 2.0),
            deadline_job(1, 4.0, 6.0, 2.0),
        ))
        trace, _ = greedy_assign(instance, unit_grid, lam=3.0)
        assert trace.objective == pytest.approx(4.0)

    def test_forced_overlap_commits(self, unit_grid):
        """Test that fully overlapping jobs are still committed online."""
        instance = Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0, jobs=(
            deadline_job(0, 0.0, 1.0, 1.0),
            deadline_job(1, 0.0, 1.0, 1.0),
        ))
        trace, _ = greedy_assign(instance, unit_grid, lam=3.0)
        assert trace.objective == pytest.approx(4.0)

    def test_dual_identity(self):
        """Test sum delta + sum gamma = ((1 - mu)/lambda) sum f_i."""
        grids = Grids(speeds=(0.5, 1.0, 2.0), time_step=0.5)
        for seed in range(5):
            instance = gen_random(seed, n=5, m=2, model=Model.ENERGY_DEADLINE, alpha=2.0,
                                  time_step=1.0, p_range=(1.0, 4.0), horizon=8.0)
            _, duals = greedy_assign(instance, grids, trials=100, seed=seed)
            lam, mu = duals.lambda_mu
            expected = (1.0 - mu) / lam * sum(duals.machine_energy.values())
            assert duals.objective() == pytest.approx(expected, rel=1e-9)

    def test_incremental_assign(self, unit_grid):
        """Test driving the scheduler job by job."""
        scheduler = GreedyEnergyScheduler(1, unit_grid, PowerFunction.power_law(2.0), lam=3.0, mu=0.5)
        first = scheduler.assign(deadline_job(0, 0.0, 2.0, 1.0))
        second = scheduler.assign(deadline_job(1, 0.0, 2.0, 1.0))
        assert (first.start, second.start) == (0.0, 1.0)
        assert scheduler.total_energy == pytest.approx(2.0)
        assert scheduler.load.speed_at(0, 0.5) == 1.0
        assert scheduler.load.speed_at(0, 2.5) == 0.0

    def test_refuses_off_grid_durations(self):
        """Test p=3 at speed 2 on a unit step names the step 1.5."""
        instance = Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0,
                            jobs=(deadline_job(0, 0.0, 6.0, 3.0),))
        with pytest.raises(GridError, match=r"time_step=1.5"):
            greedy_assign(instance, Grids(speeds=(1.0, 2.0), time_step=1.0), lam=3.0)
        trace, _ = greedy_assign(instance, Grids(speeds=(1.0, 2.0), time_step=1.5), lam=3.0)
        assert trace.records[0].end in (1.5, 3.0, 4.5, 6.0)

    def test_rejects_flow_instances(self, two_job_instance, unit_grid):
        """Test that flow instances are refused."""
        with pytest.raises(ModelMismatchError):
            greedy_assign(two_job_instance, unit_grid, lam=3.0)
