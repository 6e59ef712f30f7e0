from dataclasses import replace

import pytest

from analysis.verify import (
    VerifyReport, verify_energy_config_duals, verify_flow_duals, verify_flow_energy_duals,
)
from model.instance_model import Instance, Job, Model, gen_random
from scheduler.energy_min import greedy_assign
from scheduler.flow_energy import simulate_flow_energy
from scheduler.flowtime import simulate_flow


class TestVerifyReport:
    """Test cases for the report bookkeeping."""

    def test_observe(self):
        """Test tolerance and slack tracking."""
        report = VerifyReport()
        assert not report.observe(1.0 + 1e-12, 1.0)
        assert report.observe(1.1, 1.0)
        assert report.checked_count == 2
        assert report.min_slack == pytest.approx(-0.1)

    def test_absolute_floor(self):
        """Test right-hand sides near zero use the absolute floor."""
        report = VerifyReport()
        assert not report.observe(5e-13, 0.0)
        assert report.observe(1e-11, 0.0)

    def test_empty_report(self):
        """Test an unused report is certified with no slack."""
        data = VerifyReport().to_dict()
        assert data['certified'] is True
        assert data['min_slack'] is None


class TestFlowDuals:
    """Test cases for the flow dual checker."""

    def test_single_job_slack(self):
        """Test the single-job constraint holds with slack beta at the release."""
        instance = Instance(machines=1, jobs=(Job(id=0, release=0, proc=(4,)),))
        result = simulate_flow(instance, 1.0)
        report = verify_flow_duals(result)
        assert report.certified
        assert report.min_slack == pytest.approx(result.beta(0, 0.0))
        assert result.beta(0, 0.0) == pytest.approx(0.25)

    def test_hand_instance(self, six_unit_jobs):
        """Test both rejection rules leave the duals feasible."""
        report = verify_flow_duals(simulate_flow(six_unit_jobs, 0.5))
        assert report.certified
        assert report.checked_count > 0

    def test_corrupted_lambda(self, six_unit_jobs):
        """Test that inflated lambdas are caught."""
        result = simulate_flow(six_unit_jobs, 0.5)
        corrupted = replace(result, lambdas={k: 10.0 * v for k, v in result.lambdas.items()})
        report = verify_flow_duals(corrupted)
        assert not report.certified
        assert all(v.constraint == 'flow_dual' for v in report.violations)

    @pytest.mark.parametrize("epsilon", [1.0, 0.5, 0.25])
    def test_single_machine_corpus(self, flow_corpus, epsilon):
        """Test seeded single-machine traces verify on every machine and time."""
        for instance in flow_corpus:
            assert verify_flow_duals(simulate_flow(instance, epsilon)).certified

    def test_multi_machine_dispatched_scope(self):
        """Test seeded two-machine traces under the dispatched scope."""
        for seed in range(10):
            instance = gen_random(seed, n=8, m=2, horizon=10.0)
            assert verify_flow_duals(simulate_flow(instance, 0.5), scope='dispatched').certified

    def test_scope_widens_checks(self):
        """Test that the all scope checks the other machine at every event time."""
        instance = Instance(machines=2, jobs=(Job(id=0, release=0, proc=(2, 2)),))
        result = simulate_flow(instance, 1.0)
        wide = verify_flow_duals(result, scope='all')
        narrow = verify_flow_duals(result, scope='dispatched')
        assert (wide.checked_count, narrow.checked_count) == (4, 3)
        assert wide.certified and narrow.certified
        assert (wide.to_dict()['scope'], narrow.to_dict()['scope']) == ('all', 'dispatched')

    def test_two_machine_seed_176(self):
        """Test the seed-176 two-machine run: the dispatch machine always verifies."""
        instance = gen_random(176, n=8, m=2, horizon=10.0)
        result = simulate_flow(instance, 0.5)
        assert verify_flow_duals(result, scope='dispatched').certified
        jobs = instance.job_map()
        for violation in verify_flow_duals(result, scope='all').violations:
            assert violation.machine != result.dispatch[violation.job]
            assert violation.time > jobs[violation.job].release

    def test_bad_scope(self, two_job_instance):
        """Test an unknown scope."""
        with pytest.raises(ValueError):
            verify_flow_duals(simulate_flow(two_job_instance, 0.5), scope='some')

    def test_deterministic(self, six_unit_jobs):
        """Test identical reports on repeated checks."""
        result = simulate_flow(six_unit_jobs, 0.5)
        assert verify_flow_duals(result).to_dict() == verify_flow_duals(result).to_dict()


class TestFlowEnergyDuals:
    """Test cases for the flow+energy dual checker."""

    def test_single_job(self):
        """Test positive slack for one job at alpha=2, eps=1."""
        instance = Instance(machines=1, model=Model.FLOW_ENERGY, alpha=2.0,
                            jobs=(Job(id=0, release=0.0, proc=(1.0,), weight=1.0),))
        report = verify_flow_energy_duals(simulate_flow_energy(instance, 1.0))
        assert report.certified
        assert report.min_slack > 0

    def test_corpus(self, flow_energy_corpus):
        """Test seeded traces at event times and interior samples."""
        for instance in flow_energy_corpus:
            for epsilon in (1.0, 0.5):
                assert verify_flow_energy_duals(simulate_flow_energy(instance, epsilon)).certified

    def test_zero_u_breaks_dense_jobs(self, mocker):
        """Test that forcing u to zero exposes a dense pending job."""
        instance = Instance(machines=1, model=Model.FLOW_ENERGY, alpha=2.0, jobs=(
            Job(id=0, release=0.0, proc=(1e5,), weight=1e5),
            Job(id=1, release=0.0, proc=(10.0,), weight=1e4),
            Job(id=2, release=0.0, proc=(0.01,), weight=1.0),
        ))
        result = simulate_flow_energy(instance, 1.0)
        assert verify_flow_energy_duals(result).certified

        mocker.patch.object(result, 'u', return_value=0.0)
        report = verify_flow_energy_duals(result)
        assert not report.certified
        assert any(v.job == 2 for v in report.violations)


class TestEnergyConfigDuals:
    """Test cases for the configuration dual checker."""

    def test_exhaustive_two_jobs(self, overlapping_energy_instance, unit_grid):
        """Test every configuration of two overlapping jobs."""
        _, duals = greedy_assign(overlapping_energy_instance, unit_grid, lam=3.0)
        report = verify_energy_config_duals(duals, overlapping_energy_instance, unit_grid)
        assert report.certified
        # 4 delta/beta checks plus 3 x 3 configurations
        assert report.checked_count == 13

    def test_estimated_lambda(self, overlapping_energy_instance, unit_grid):
        """Test the duals built with the estimated smoothness constant."""
        _, duals = greedy_assign(overlapping_energy_instance, unit_grid, trials=200, seed=0)
        assert verify_energy_config_duals(duals, overlapping_energy_instance, unit_grid).certified

    def test_corrupted_beta(self, overlapping_energy_instance, unit_grid):
        """Test that inflated betas are caught."""
        _, duals = greedy_assign(overlapping_energy_instance, unit_grid, lam=3.0)
        corrupted = replace(duals, beta={k: 10.0 * v for k, v in duals.beta.items()})
        report = verify_energy_config_duals(corrupted, overlapping_energy_instance, unit_grid)
        assert not report.certified
        assert {v.constraint for v in report.violations} == {'configuration'}

    def test_sampled_configurations(self, unit_grid):
        """Test the seeded sampling path and its budget."""
        instance = gen_random(3, n=5, m=1, model=Model.ENERGY_DEADLINE, alpha=2.0, time_step=1.0,
                              p_range=(1.0, 2.0), horizon=4.0)
        _, duals = greedy_assign(instance, unit_grid, lam=3.0)
        first = verify_energy_config_duals(duals, instance, unit_grid, max_configs=50, seed=7)
        second = verify_energy_config_duals(duals, instance, unit_grid, max_configs=50, seed=7)
        assert first.to_dict() == second.to_dict()
        assert first.checked_count <= len(duals.beta) + 50
