from dataclasses import replace

import pytest

from analysis.oracle import (
    brute_force_energy_opt, brute_force_flow_opt, dual_lower_bound, flow_ratio_bound,
)
from model.instance_model import Instance, Job, Model, gen_random
from scheduler.energy_min import Grids, greedy_assign
from scheduler.flow_energy import simulate_flow_energy
from scheduler.flowtime import simulate_flow
from scheduler.rejection import RejectionRules
from utils.errors import InstanceTooLargeError, ModelMismatchError, UnverifiedDualsError


def flow_instance(*jobs, machines=1):
    """Flow instance from (release, p) pairs."""
    return Instance(machines=machines, jobs=tuple(
        Job(id=k, release=release, proc=(p,) * machines) for k, (release, p) in enumerate(jobs)))


class TestBruteForceFlow:
    """Test cases for the exact flow optimum."""

    def test_single_job(self):
        """Test one job has flow p."""
        assert brute_force_flow_opt(flow_instance((2.0, 3.0))) == pytest.approx(3.0)

    def test_spt_order(self, two_job_instance):
        """Test two jobs at 0 with p in {1, 2}."""
        assert brute_force_flow_opt(two_job_instance) == pytest.approx(4.0)

    def test_equal_long_jobs(self):
        """Test 1/eps jobs of length L sum to j*L."""
        instance = flow_instance((0.0, 3.0), (0.0, 3.0))
        assert brute_force_flow_opt(instance) == pytest.approx(3.0 + 6.0)

    def test_waiting_can_pay_off(self):
        """Test that idling for a short job beats starting the long one."""
        instance = flow_instance((0.0, 10.0), (0.5, 1.0))
        # long first: 10 + 10.5; short first at 0.5: 1 + 11.5
        assert brute_force_flow_opt(instance) == pytest.approx(12.5)

    def test_two_machines(self):
        """Test jobs spread over two machines."""
        instance = flow_instance((0.0, 2.0), (0.0, 2.0), machines=2)
        assert brute_force_flow_opt(instance) == pytest.approx(4.0)

    def test_empty_instance(self):
        """Test an empty instance."""
        assert brute_force_flow_opt(Instance(machines=1, jobs=())) == 0.0

    def test_limits(self):
        """Test the job and machine caps."""
        with pytest.raises(InstanceTooLargeError):
            brute_force_flow_opt(gen_random(0, n=9, m=1))
        with pytest.raises(InstanceTooLargeError):
            brute_force_flow_opt(gen_random(0, n=2, m=4))

    def test_baseline_never_beats_opt(self):
        """Test the non-rejecting baseline against the optimum."""
        for seed in range(10):
            instance = gen_random(seed, n=6, m=1 + seed % 2, horizon=8.0)
            baseline = simulate_flow(instance, 1.0, RejectionRules.disabled())
            assert brute_force_flow_opt(instance) <= baseline.total_flow + 1e-9

    @pytest.mark.parametrize("epsilon", [1.0, 0.5])
    def test_competitive_bound(self, epsilon):
        """Test total flow within 2((1+eps)/eps)^2 of the optimum."""
        for seed in range(10):
            instance = gen_random(seed, n=6, m=1 + seed % 2, horizon=8.0)
            result = simulate_flow(instance, epsilon)
            assert result.total_flow <= flow_ratio_bound(epsilon) * brute_force_flow_opt(instance) + 1e-9


class TestBruteForceEnergy:
    """Test cases for the exact energy optimum."""

    def _instance(self, *jobs):
        return Instance(machines=1, model=Model.ENERGY_DEADLINE, alpha=2.0, jobs=tuple(
            Job(id=k, release=r, proc=(p,), deadline=d) for k, (r, d, p) in enumerate(jobs)))

    def test_single_job(self):
        """Test the cheapest feasible speed."""
        instance = self._instance((0.0, 2.0, 2.0))
        assert brute_force_energy_opt(instance, Grids(speeds=(1.0, 2.0), time_step=1.0)) == pytest.approx(2.0)

    def test_overlapping_jobs_staggered(self, overlapping_energy_instance, unit_grid):
        """Test that the optimum staggers two unit jobs."""
        assert brute_force_energy_opt(overlapping_energy_instance, unit_grid) == pytest.approx(2.0)

    def test_forced_parallel(self, unit_grid):
        """Test two unit jobs that must share one slot."""
        instance = self._instance((0.0, 1.0, 1.0), (0.0, 1.0, 1.0))
        assert brute_force_energy_opt(instance, unit_grid) == pytest.approx(4.0)

    def test_disjoint_windows(self, unit_grid):
        """Test separable jobs add their optima."""
        instance = self._instance((0.0, 2.0, 2.0), (5.0, 7.0, 2.0))
        assert brute_force_energy_opt(instance, unit_grid) == pytest.approx(4.0)

    def test_cap(self, overlapping_energy_instance, unit_grid):
        """Test the strategy-combination cap."""
        with pytest.raises(InstanceTooLargeError):
            brute_force_energy_opt(overlapping_energy_instance, unit_grid, cap=3)

    def test_model_mismatch(self, two_job_instance, unit_grid):
        """Test flow instances are refused."""
        with pytest.raises(ModelMismatchError):
            brute_force_energy_opt(two_job_instance, unit_grid)

    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_greedy_within_alpha_power_alpha(self, alpha):
        """Test OPT <= greedy <= alpha^alpha OPT on small seeded instances."""
        grids = Grids(speeds=(1.0, 2.0), time_step=0.5)
        for seed in range(6):
            instance = gen_random(seed, n=3, m=1, model=Model.ENERGY_DEADLINE, alpha=alpha,
                                  time_step=1.0, p_range=(1.0, 3.0), horizon=6.0,
                                  deadline_slack=(1.0, 2.0))
            trace, _ = greedy_assign(instance, grids, trials=100, seed=seed)
            opt = brute_force_energy_opt(instance, grids)
            assert opt <= trace.objective + 1e-9
            assert trace.objective <= alpha ** alpha * opt + 1e-9


class TestDualLowerBound:
    """Test cases for the dual lower bound."""

    def test_empty_instance(self):
        """Test that an empty run bounds nothing."""
        assert dual_lower_bound(simulate_flow(Instance(machines=1, jobs=()), 1.0)) == 0.0

    def test_single_job(self):
        """Test p (1 - eps/(1+eps)^2) for a single job."""
        result = simulate_flow(flow_instance((0.0, 4.0)), 1.0)
        assert dual_lower_bound(result) == pytest.approx(3.0)

    def test_hand_instance(self, six_unit_jobs):
        """Test sum lambda minus the beta integral on six unit jobs."""
        bound = dual_lower_bound(simulate_flow(six_unit_jobs, 0.5))
        assert bound == pytest.approx(7.0 - 24.0 / 9.0)
        assert bound <= 2 * brute_force_flow_opt(six_unit_jobs)

    def test_bounded_by_opt(self, flow_corpus):
        """Test the bound against twice the optimum on seeded instances."""
        for instance in flow_corpus:
            bound = dual_lower_bound(simulate_flow(instance, 0.5))
            assert bound <= 2 * brute_force_flow_opt(instance) + 1e-9

    def test_flow_energy_single_job(self):
        """Test sum lambda + (1 - alpha) integral u^alpha for one job."""
        instance = Instance(machines=1, model=Model.FLOW_ENERGY, alpha=2.0,
                            jobs=(Job(id=0, release=0.0, proc=(1.0,), weight=1.0),))
        assert dual_lower_bound(simulate_flow_energy(instance, 1.0)) == pytest.approx(0.5)

    def test_unverified_duals(self, six_unit_jobs):
        """Test that infeasible duals give no bound."""
        result = simulate_flow(six_unit_jobs, 0.5)
        corrupted = replace(result, lambdas={k: 10.0 * v for k, v in result.lambdas.items()})
        with pytest.raises(UnverifiedDualsError):
            dual_lower_bound(corrupted)
