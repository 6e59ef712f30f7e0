"""
Exact baselines for empirical competitive ratios.

brute_force_flow_opt and brute_force_energy_opt enumerate small instances exactly;
dual_lower_bound returns the dual objective of a verified run.
"""

import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from analysis.verify import VerifyReport, verify_flow_duals, verify_flow_energy_duals
from model.instance_model import Instance, Job, Model
from scheduler.energy_min import Grids, PowerFunction, _power_list, enumerate_strategies
from scheduler.flow_energy import EnergyFlowResult
from scheduler.flowtime import FlowResult
from utils.errors import InstanceTooLargeError, ModelMismatchError, UnverifiedDualsError

logger = logging.getLogger(__name__)

MAX_FLOW_MACHINES = 3
ENERGY_COMBINATION_CAP = 10 ** 7


def flow_ratio_bound(epsilon: float) -> float:
    """2 * ((1 + eps) / eps)^2."""
    return 2.0 * ((1.0 + epsilon) / epsilon) ** 2


def _pareto(points: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    kept = []
    best_cost = math.inf
    for finish, cost in sorted(points):
        if cost < best_cost:
            kept.append((finish, cost))
            best_cost = cost
    return kept


def _subset_flow(jobs: Sequence[Job], machine: int) -> List[float]:
    """Minimum total flow of every job subset (bitmask index) on one machine, via Pareto fronts of (finish, flow)."""
    n = len(jobs)
    fronts: List[List[Tuple[float, float]]] = [[] for _ in range(1 << n)]
    fronts[0] = [(0.0, 0.0)]
    best = [math.inf] * (1 << n)
    # masks are visited in increasing order, so every predecessor of a mask is complete
    for mask in range(1 << n):
        front = _pareto(fronts[mask])
        fronts[mask] = []
        if not front:
            continue
        best[mask] = min(cost for _, cost in front)
        for k in range(n):
            if mask & (1 << k):
                continue
            job = jobs[k]
            target = fronts[mask | (1 << k)]
            for finish, cost in front:
                end = max(finish, job.release) + job.p(machine)
                target.append((end, cost + end - job.release))
    return best


def brute_force_flow_opt(instance: Instance, cap: int = 8) -> float:
    """
    Exact minimum total flow time without rejection.

    Every machine assignment is combined with the best non-preemptive order of
    each machine's subset.

    Raises:
        InstanceTooLargeError: If n > cap or m > 3
    """
    n, m = instance.n, instance.machines
    if n > cap:
        raise InstanceTooLargeError(f"brute-force flow OPT limited to {cap} jobs, got {n}")
    if m > MAX_FLOW_MACHINES:
        raise InstanceTooLargeError(f"brute-force flow OPT limited to {MAX_FLOW_MACHINES} machines, got {m}")
    if n == 0:
        return 0.0

    jobs = instance.jobs
    tables = [_subset_flow(jobs, i) for i in range(m)]
    best = math.inf
    for assignment in itertools.product(range(m), repeat=n):
        masks = [0] * m
        for k, machine in enumerate(assignment):
            masks[machine] |= 1 << k
        total = sum(tables[i][masks[i]] for i in range(m))
        if total < best:
            best = total
    logger.debug(f"flow OPT over {m ** n} assignments: {best:.6g}")
    return float(best)


def _count_combinations(counts: Sequence[int]) -> int:
    total = 1
    for count in counts:
        total *= count
    return total


def brute_force_energy_opt(instance: Instance, grids: Grids,
                           powers: Optional[Union[PowerFunction, Sequence[PowerFunction]]] = None,
                           cap: int = ENERGY_COMBINATION_CAP) -> float:
    """
    Exact minimum energy over all per-job strategy choices on the grid.

    Depth-first search in arrival order with branch-and-bound on the partial
    energy; marginal energies are non-negative, so partial energy never exceeds
    the final one. Loads live on the elementary intervals cut by all strategy
    endpoints.

    Raises:
        InstanceTooLargeError: If the number of strategy combinations exceeds cap
    """
    if instance.model != Model.ENERGY_DEADLINE:
        raise ModelMismatchError("energy OPT requires an energy_deadline instance")
    if instance.n == 0:
        return 0.0
    if powers is None:
        powers = PowerFunction.power_law(instance.alpha)
    powers = _power_list(powers, instance.machines)

    strategies = [enumerate_strategies(job, grids) for job in instance.jobs]
    combinations = _count_combinations(len(s) for s in strategies)
    if combinations > cap:
        raise InstanceTooLargeError(
            f"{combinations} strategy combinations exceed the brute-force cap {cap}")

    cuts = np.unique(np.asarray([x for group in strategies for s in group for x in (s.start, s.end)]))
    widths = np.diff(cuts)
    load = np.zeros((instance.machines, len(widths)))

    def span(strategy) -> Tuple[int, int]:
        return (int(np.searchsorted(cuts, strategy.start)), int(np.searchsorted(cuts, strategy.end)))

    spans = [[span(s) for s in group] for group in strategies]

    def marginal(machine: int, lo: int, hi: int, speed: float) -> float:
        current = load[machine, lo:hi]
        power = powers[machine]
        return float(np.sum(widths[lo:hi] * (power(current + speed) - power(current))))

    # try cheap standalone strategies first so good bounds appear early
    orders = []
    for group in strategies:
        alone = [float((s.end - s.start) * powers[s.machine](s.speed)) for s in group]
        orders.append(sorted(range(len(group)), key=lambda k: (alone[k],) + group[k].order_key))

    best = [math.inf]

    def search(index: int, partial: float):
        if partial >= best[0]:
            return
        if index == len(strategies):
            best[0] = partial
            return
        group, group_spans = strategies[index], spans[index]
        for k in orders[index]:
            s = group[k]
            lo, hi = group_spans[k]
            cost = marginal(s.machine, lo, hi, s.speed)
            if partial + cost >= best[0]:
                continue
            load[s.machine, lo:hi] += s.speed
            search(index + 1, partial + cost)
            load[s.machine, lo:hi] -= s.speed

    search(0, 0.0)
    logger.debug(f"energy OPT over {combinations} combinations: {best[0]:.6g}")
    return float(best[0])


def dual_lower_bound(result: Union[FlowResult, EnergyFlowResult],
                     report: Optional[VerifyReport] = None, scope: str = 'all') -> float:
    """
    Dual objective of a run whose dual constraints hold.

    For flow this is sum lambda - sum integral beta; for flow+energy it is
    sum lambda + (1 - alpha) sum integral u^alpha. The duals are verified
    first unless a report is supplied.

    Raises:
        UnverifiedDualsError: If the dual constraints are violated
    """
    if result.instance.n == 0:
        return 0.0
    if report is None:
        if isinstance(result, FlowResult):
            report = verify_flow_duals(result, scope=scope)
        else:
            report = verify_flow_energy_duals(result)
    if not report.certified:
        raise UnverifiedDualsError(
            f"{len(report.violations)} dual constraints violated; no lower bound available")
    return float(result.dual_objective())
