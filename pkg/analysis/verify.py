"""
Dual-feasibility checkers.

Each checker evaluates the dual constraints of one engine pointwise and returns a
VerifyReport; violations are data, not exceptions. Tolerance is relative (1e-9)
with an absolute floor (1e-12) for right-hand sides near zero.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from model.instance_model import Instance
from scheduler.energy_min import (
    EnergyDuals, Grids, PowerFunction, _power_list, configuration_energy,
)
from scheduler.flow_energy import EnergyFlowResult
from scheduler.flowtime import FlowResult
from utils.helpers import REL_TOLERANCE, ABS_TOLERANCE_FLOOR, tolerance_for

logger = logging.getLogger(__name__)

FLOW_SCOPES = ('all', 'dispatched')


@dataclass(frozen=True)
class Violation:
    """One violated dual constraint."""
    constraint: str
    machine: int
    job: Optional[int]
    time: Optional[float]
    lhs: float
    rhs: float
    configuration: Optional[str] = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            'constraint': self.constraint,
            'machine': self.machine,
            'job': self.job,
            'time': self.time,
            'configuration': self.configuration,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'slack': self.slack,
        }


@dataclass
class VerifyReport:
    """Result of a dual-feasibility check; certified iff no violations."""
    violations: List[Violation] = field(default_factory=list)
    checked_count: int = 0
    tolerance: float = REL_TOLERANCE
    min_slack: float = float('inf')
    scope: Optional[str] = None

    @property
    def certified(self) -> bool:
        return not self.violations

    def observe(self, lhs: float, rhs: float) -> bool:
        """Count one check; return True if it is violated."""
        self.checked_count += 1
        slack = rhs - lhs
        if slack < self.min_slack:
            self.min_slack = slack
        return lhs - rhs > tolerance_for(rhs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'certified': self.certified,
            'checked_count': self.checked_count,
            'tolerance': self.tolerance,
            'absolute_floor': ABS_TOLERANCE_FLOOR,
            'min_slack': None if self.checked_count == 0 else self.min_slack,
            'violations': [v.to_dict() for v in self.violations],
            'scope': self.scope,
        }


def verify_flow_duals(result: FlowResult, epsilon: Optional[float] = None,
                      scope: str = 'all') -> VerifyReport:
    """
    Check lambda_j/p_ij - beta_i(t) <= (t - r_j)/p_ij + 1.

    Checked at t = r_j and at every event time t >= r_j with beta taken just
    after t; between events beta is constant and the right side grows, so
    these checks cover all t. With scope="dispatched" machines other than the
    dispatch machine are only checked at t = r_j.
    """
    if scope not in FLOW_SCOPES:
        raise ValueError(f"scope must be one of {FLOW_SCOPES}")
    if epsilon is not None and epsilon != result.epsilon:
        logger.warning(f"verifying with eps={epsilon} a run made with eps={result.epsilon}")

    report = VerifyReport(scope=scope)
    times = result.event_times()
    machines = range(result.instance.machines)
    beta_at = {i: {t: result.beta(i, t) for t in times} for i in machines}

    for job in result.instance.jobs:
        lam = result.lambdas[job.id]
        own_machine = result.dispatch[job.id]
        for i in machines:
            p = job.p(i)
            check_times = [job.release] if (scope == 'dispatched' and i != own_machine) else \
                [t for t in times if t >= job.release]
            for t in check_times:
                beta = beta_at[i][t] if t in beta_at[i] else result.beta(i, t)
                lhs = lam / p - beta
                rhs = (t - job.release) / p + 1.0
                if report.observe(lhs, rhs):
                    report.violations.append(Violation('flow_dual', i, job.id, t, lhs, rhs))

    logger.debug(f"flow dual check: {report.checked_count} constraints, "
                 f"{len(report.violations)} violations")
    return report


def _sample_times(event_times: Sequence[float], grid_points: int):
    """Event times plus grid_points interior samples per interval; flags interior samples."""
    samples = list(event_times)
    interior = [False] * len(samples)
    for a, b in zip(event_times, event_times[1:]):
        for k in range(1, grid_points + 1):
            samples.append(a + (b - a) * k / (grid_points + 1))
            interior.append(True)
    order = np.argsort(samples, kind='stable')
    return np.asarray(samples, dtype=float)[order], np.asarray(interior, dtype=bool)[order]


def verify_flow_energy_duals(result: EnergyFlowResult, epsilon: Optional[float] = None,
                             alpha: Optional[float] = None, gamma: Optional[float] = None,
                             grid_points: int = 8) -> VerifyReport:
    """
    Check lambda_j/p_ij <= delta_ij (t - r_j + p_ij) + alpha u_i(t)^(alpha-1)
    + alpha/(gamma (alpha-1)) * w_j^((alpha-1)/alpha).

    Checked at every event time t >= r_j and at grid_points interior samples per
    event interval; interior-only violations use a distinct constraint id.
    """
    epsilon = result.epsilon if epsilon is None else epsilon
    alpha = result.alpha if alpha is None else alpha
    gamma = result.gamma if gamma is None else gamma

    report = VerifyReport()
    samples, interior = _sample_times(result.event_times(), grid_points)
    if len(samples) == 0:
        return report

    for i in range(result.instance.machines):
        u_values = np.broadcast_to(np.asarray(result.u(i, samples), dtype=float), samples.shape)
        u_term = alpha * np.power(u_values, alpha - 1.0)
        for job in result.instance.jobs:
            p = job.p(i)
            mask = samples >= job.release
            times = samples[mask]
            lhs = result.lambdas[job.id] / p
            rhs = (job.density(i) * (times - job.release + p) + u_term[mask]
                   + alpha / (gamma * (alpha - 1.0)) * job.weight ** ((alpha - 1.0) / alpha))
            for t, r, is_interior in zip(times, rhs, interior[mask]):
                if report.observe(lhs, float(r)):
                    constraint = 'flow_energy_interior' if is_interior else 'flow_energy_event'
                    report.violations.append(Violation(constraint, i, job.id, float(t), lhs, float(r)))

    logger.debug(f"flow+energy dual check: {report.checked_count} constraints, "
                 f"{len(report.violations)} violations")
    return report


def verify_energy_config_duals(duals: EnergyDuals, instance: Instance, grids: Grids,
                               max_configs: int = 10000, seed: int = 0,
                               powers: Optional[Union[PowerFunction, Sequence[PowerFunction]]] = None
                               ) -> VerifyReport:
    """
    Check gamma_i + sum_{(j,k) in A} beta_ijk <= f_i(A) over configurations A.

    A configuration picks, for every job, nothing or one of its strategies on
    machine i. All configurations are enumerated when there are at most
    max_configs of them, otherwise max_configs are sampled uniformly (seeded).
    Also checks delta_j <= beta_ijk for every recorded strategy.
    """
    if powers is None:
        powers = PowerFunction.power_law(instance.alpha)
    powers = _power_list(powers, instance.machines)
    report = VerifyReport()

    for (i, j, k), beta in sorted(duals.beta.items()):
        if report.observe(duals.delta[j], beta):
            report.violations.append(Violation('delta_beta', i, j, None, duals.delta[j], beta,
                                               configuration=f"strategy {k}"))

    rng = np.random.default_rng(seed)
    for i in range(instance.machines):
        options = []
        for job in instance.jobs:
            choices = [None] + [(k, s) for k, s in enumerate(duals.strategies.get(job.id, []))
                                if s.machine == i]
            options.append((job.id, choices))
        total = 1
        for _, choices in options:
            total *= len(choices)

        if total <= max_configs:
            configurations = itertools.product(*(choices for _, choices in options))
        else:
            configurations = (
                tuple(choices[int(rng.integers(len(choices)))] for _, choices in options)
                for _ in range(max_configs)
            )

        gamma_i = duals.gamma_m.get(i, 0.0)
        for configuration in configurations:
            picked = [(job_id, choice) for (job_id, _), choice in zip(options, configuration)
                      if choice is not None]
            lhs = gamma_i + sum(duals.beta[(i, job_id, k)] for job_id, (k, _) in picked)
            rhs = configuration_energy((s for _, (_, s) in picked), i, powers[i])
            if report.observe(lhs, rhs):
                label = ",".join(f"{job_id}:{k}" for job_id, (k, _) in picked)
                report.violations.append(Violation('configuration', i, None, None, lhs, rhs,
                                                   configuration=label))

    logger.debug(f"configuration dual check: {report.checked_count} constraints, "
                 f"{len(report.violations)} violations")
    return report
