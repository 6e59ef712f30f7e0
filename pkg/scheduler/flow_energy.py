"""
Online weighted flow-time plus energy scheduler under speed scaling, with rejection.

Pending jobs are served in density order, each at a speed fixed at its start from
the pending weight. A running job accumulates the weight of every job dispatched to
its machine and is rejected once that exceeds w_k/eps. The run builds lambda_j and
the fractional-weight function V_i(t) from which u_i(t) is derived.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from sortedcontainers import SortedList

from model.instance_model import (
    EventKind, ExecutionRecord, Instance, Job, Model, Outcome, ScheduleTrace, TraceEvent,
)
from scheduler.rejection import RejectionEvent, RejectionLedger
from utils.errors import ModelMismatchError, ParameterError
from utils.step_function import PiecewiseLinearFunction

logger = logging.getLogger(__name__)


def gamma_of(epsilon: float, alpha: float) -> float:
    """
    Speed constant gamma(eps, alpha).

    (eps/(1+eps))^(1/(alpha-1)) * 1/(alpha-1) * (alpha-1+ln(alpha-1))^((alpha-1)/alpha)

    Raises:
        ParameterError: If eps <= 0, alpha <= 1 or alpha-1+ln(alpha-1) <= 0
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    if not (alpha > 1):
        raise ParameterError("alpha must be greater than 1")
    base = alpha - 1.0 + math.log(alpha - 1.0)
    if base <= 0:
        raise ParameterError(f"alpha={alpha} too close to 1: alpha-1+ln(alpha-1) must be positive")
    return ((epsilon / (1.0 + epsilon)) ** (1.0 / (alpha - 1.0))
            * (1.0 / (alpha - 1.0))
            * base ** ((alpha - 1.0) / alpha))


def u_coefficient(epsilon: float, alpha: float, gamma: float) -> float:
    """c such that u_i(t) = c * V_i(t)^(1/alpha)."""
    return (epsilon / (gamma * (1.0 + epsilon) * (alpha - 1.0))) ** (1.0 / (alpha - 1.0))


def flow_energy_ratio_bound(epsilon: float, alpha: float) -> float:
    """
    Closed-form competitive-ratio certificate for the flow+energy policy.

    Returns math.inf when the denominator is not positive.
    """
    gamma = gamma_of(epsilon, alpha)
    numerator = 2.0 + alpha / (gamma * (alpha - 1.0)) + gamma ** alpha
    denominator = (epsilon / (1.0 + epsilon)
                   - (epsilon / (gamma * (1.0 + epsilon))) ** (alpha / (alpha - 1.0))
                   * (alpha - 1.0) ** (-1.0 / (alpha - 1.0)))
    if denominator <= 0:
        return math.inf
    return numerator / denominator


def density_key(job: Job, machine: int) -> Tuple[float, float, int]:
    """Non-increasing density, then release, then id."""
    return (-job.density(machine), job.release, job.id)


class MachineStateEnergy:
    """Pending set, running job and weight counter of one machine."""

    def __init__(self, index: int):
        self.index = index
        self.pending = SortedList(key=lambda job: density_key(job, index))
        # (job, start, speed, end)
        self.running: Optional[Tuple[Job, float, float, float]] = None
        self.v = 0.0

    @property
    def pending_weight(self) -> float:
        return float(sum(job.weight for job in self.pending))

    def running_remaining(self, t: float) -> float:
        job, start, speed, _ = self.running
        return job.p(self.index) - speed * (t - start)


def speed_at_start(state: MachineStateEnergy, gamma: float, alpha: float) -> float:
    """gamma * (sum of pending weights)^(1/alpha), pending set including the job started."""
    if len(state.pending) == 0:
        raise ParameterError("cannot start a job on an empty pending set")
    return gamma * state.pending_weight ** (1.0 / alpha)


def lambda_i_weighted(job: Job, machine: int, state: MachineStateEnergy, epsilon: float,
                      gamma: float, alpha: float) -> float:
    """
    Weighted dispatch cost of a job on a machine.

    w_j * (p_ij/eps + sum_{l <= j} p_il / (gamma W_l^(1/alpha)))
    + (sum_{l > j} w_l) * p_ij / (gamma W_j^(1/alpha)),
    with W_l the pending weight from l onward in density order, j inserted.
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    if not (gamma > 0):
        raise ParameterError("gamma must be positive")
    ordered = sorted(list(state.pending) + [job], key=lambda k: density_key(k, machine))
    position = ordered.index(job)
    suffix = np.cumsum([k.weight for k in reversed(ordered)])[::-1]

    p = job.p(machine)
    own = p / epsilon
    for idx in range(position + 1):
        own += ordered[idx].p(machine) / (gamma * suffix[idx] ** (1.0 / alpha))
    succeeding = float(sum(k.weight for k in ordered[position + 1:]))
    return job.weight * own + succeeding * p / (gamma * suffix[position] ** (1.0 / alpha))


@dataclass
class EnergyFlowResult:
    """Outcome of a flow+energy run with lambda_j and V_i(t)."""
    instance: Instance
    epsilon: float
    alpha: float
    gamma: float
    trace: ScheduleTrace
    lambdas: Dict[int, float]
    dispatch: Dict[int, int]
    fractional_weight: List[PiecewiseLinearFunction]
    ledger: RejectionLedger

    @property
    def u_coefficient(self) -> float:
        return u_coefficient(self.epsilon, self.alpha, self.gamma)

    def V(self, machine: int, t):
        """Total fractional weight V_i(t), including jobs not yet definitively finished."""
        return self.fractional_weight[machine](t)

    def u(self, machine: int, t):
        """u_i(t) = c * V_i(t)^(1/alpha)."""
        values = np.maximum(np.asarray(self.V(machine, t), dtype=float), 0.0)
        result = self.u_coefficient * values ** (1.0 / self.alpha)
        return float(result) if np.ndim(result) == 0 else result

    @property
    def weighted_flow(self) -> float:
        jobs = self.instance.job_map()
        return float(sum(jobs[job_id].weight * (record.end - jobs[job_id].release)
                         for job_id, record in self.trace.records.items()))

    @property
    def energy(self) -> float:
        return float(sum((record.end - record.start) * record.speed ** self.alpha
                         for record in self.trace.records.values() if record.start is not None))

    @property
    def objective(self) -> float:
        return self.weighted_flow + self.energy

    @property
    def rejected_weight(self) -> float:
        jobs = self.instance.job_map()
        return float(sum(jobs[job_id].weight for job_id in self.trace.rejected_ids))

    @property
    def rejected_weight_fraction(self) -> float:
        total = self.instance.total_weight()
        return self.rejected_weight / total if total > 0 else 0.0

    def u_power_integral(self, machine: int) -> float:
        """Exact integral of u_i(t)^alpha = c^alpha * V_i(t)."""
        return self.u_coefficient ** self.alpha * self.fractional_weight[machine].integral()

    def dual_objective(self) -> float:
        """sum lambda_j + sum_i integral (1 - alpha) u_i(t)^alpha dt."""
        return (float(sum(self.lambdas.values()))
                + (1.0 - self.alpha) * sum(self.u_power_integral(i)
                                           for i in range(self.instance.machines)))

    def event_times(self, machine: Optional[int] = None) -> List[float]:
        times = {event.time for event in self.trace.events
                 if machine is None or event.machine == machine}
        return sorted(times)


class FlowEnergyScheduler:
    """Event-driven simulation of the density-order speed-scaling policy."""

    def __init__(self, instance: Instance, epsilon: float):
        if instance.model != Model.FLOW_ENERGY:
            raise ModelMismatchError(
                f"flow+energy engine requires a flow_energy instance, got {instance.model.value}")
        if instance.alpha is None or not (instance.alpha > 1):
            raise ParameterError("flow+energy instances need alpha > 1")
        if not (epsilon > 0):
            raise ParameterError("epsilon must be positive")
        self.instance = instance
        self.epsilon = epsilon
        self.alpha = instance.alpha
        self.gamma = gamma_of(epsilon, self.alpha)

        self.states = [MachineStateEnergy(i) for i in range(instance.machines)]
        self.ledger = RejectionLedger()
        self.events: List[TraceEvent] = []
        self.lambdas: Dict[int, float] = {}
        self.machine_of: Dict[int, int] = {}
        self.starts: Dict[int, Optional[float]] = {}
        self.speeds: Dict[int, float] = {}
        self.ends: Dict[int, float] = {}
        self.outcomes: Dict[int, Outcome] = {}
        self.remaining_at_end: Dict[int, float] = {}

        self.logger = logging.getLogger(__name__)

    def run(self) -> EnergyFlowResult:
        jobs = self.instance.jobs
        idx = 0
        while True:
            t_complete = min((s.running[3] for s in self.states if s.running is not None),
                             default=math.inf)
            t_arrival = jobs[idx].release if idx < len(jobs) else math.inf
            if t_complete == math.inf and t_arrival == math.inf:
                break
            if t_complete <= t_arrival:
                for state in self.states:
                    if state.running is not None and state.running[3] == t_complete:
                        self._complete(state, t_complete)
                        self._start_next(state, t_complete)
            else:
                self._arrive(jobs[idx], t_arrival)
                idx += 1

        result = self._build_result()
        self.logger.info(f"Flow+energy run finished: n={self.instance.n}, eps={self.epsilon}, "
                         f"alpha={self.alpha}, objective={result.objective:.6g}, "
                         f"rejected_weight={result.rejected_weight:.6g}")
        return result

    def _arrive(self, job: Job, t: float):
        candidates = [lambda_i_weighted(job, s.index, s, self.epsilon, self.gamma, self.alpha)
                      for s in self.states]
        best = min(range(len(candidates)), key=lambda i: (candidates[i], i))
        state = self.states[best]
        self.lambdas[job.id] = self.epsilon / (1.0 + self.epsilon) * candidates[best]
        self.machine_of[job.id] = best
        self.starts[job.id] = None
        self.outcomes[job.id] = Outcome.NEVER_STARTED
        self.events.append(TraceEvent(t, EventKind.DISPATCH, job.id, best))
        state.pending.add(job)

        if state.running is not None:
            state.v += job.weight
            running_job = state.running[0]
            if state.v > running_job.weight / self.epsilon:
                self._reject_running(state, t, trigger=job)
        if state.running is None:
            self._start_next(state, t)

    def _start_next(self, state: MachineStateEnergy, t: float):
        if state.running is not None or len(state.pending) == 0:
            return
        speed = speed_at_start(state, self.gamma, self.alpha)
        job = state.pending.pop(0)
        end = t + job.p(state.index) / speed
        state.running = (job, t, speed, end)
        state.v = 0.0
        self.starts[job.id] = t
        self.speeds[job.id] = speed
        self.events.append(TraceEvent(t, EventKind.START, job.id, state.index))

    def _complete(self, state: MachineStateEnergy, t: float):
        job = state.running[0]
        self.ends[job.id] = t
        self.outcomes[job.id] = Outcome.COMPLETED
        self.remaining_at_end[job.id] = 0.0
        self.events.append(TraceEvent(t, EventKind.COMPLETE, job.id, state.index))
        state.running = None
        state.v = 0.0

    def _reject_running(self, state: MachineStateEnergy, t: float, trigger: Job):
        job, _, speed, _ = state.running
        remaining = state.running_remaining(t)
        affected = tuple(k.id for k in state.pending if k.id != trigger.id) + (job.id,)
        self.ledger.record(RejectionEvent(
            time=t, machine=state.index, job=job.id, outcome=Outcome.REJECTED_WEIGHT_COUNTER,
            remaining=remaining, delay=remaining / speed, trigger=trigger.id, affected=affected))
        self.ends[job.id] = t
        self.outcomes[job.id] = Outcome.REJECTED_WEIGHT_COUNTER
        self.remaining_at_end[job.id] = remaining
        self.events.append(TraceEvent(t, EventKind.REJECT, job.id, state.index))
        state.running = None
        state.v = 0.0

    def _build_result(self) -> EnergyFlowResult:
        records = {}
        for job in self.instance.jobs:
            records[job.id] = ExecutionRecord(
                job=job.id,
                machine=self.machine_of[job.id],
                start=self.starts[job.id],
                speed=self.speeds.get(job.id, 0.0),
                end=self.ends[job.id],
                outcome=self.outcomes[job.id],
            )

        delays = self.ledger.definitive_delays(records)
        definitive = {job_id: records[job_id].end + delays[job_id] for job_id in records}
        events = list(self.events)
        for job_id in sorted(definitive, key=lambda k: (definitive[k], k)):
            events.append(TraceEvent(definitive[job_id], EventKind.DEFINITIVE_FINISH,
                                     job_id, records[job_id].machine))
        events.sort(key=lambda event: event.time)

        # Fractional weight: full until start, linear decrease while running,
        # frozen at the rejection-time value until the definitive finish.
        fractional = [PiecewiseLinearFunction() for _ in range(self.instance.machines)]
        for job in self.instance.jobs:
            record = records[job.id]
            target = fractional[record.machine]
            p = job.p(record.machine)
            start = record.start if record.start is not None else record.end
            target.add_segment(job.release, start, job.weight, job.weight)
            frozen = job.weight * self.remaining_at_end.get(job.id, p) / p
            if record.start is not None:
                target.add_segment(record.start, record.end, job.weight, frozen)
            target.add_segment(record.end, definitive[job.id], frozen, frozen)

        weighted_flow = float(sum(job.weight * (records[job.id].end - job.release)
                                  for job in self.instance.jobs))
        energy = float(sum((r.end - r.start) * r.speed ** self.alpha
                           for r in records.values() if r.start is not None))
        trace = ScheduleTrace(model=Model.FLOW_ENERGY, records=records, events=events,
                              objective=weighted_flow + energy, definitive_finish=definitive)
        return EnergyFlowResult(
            instance=self.instance,
            epsilon=self.epsilon,
            alpha=self.alpha,
            gamma=self.gamma,
            trace=trace,
            lambdas=dict(self.lambdas),
            dispatch=dict(self.machine_of),
            fractional_weight=fractional,
            ledger=self.ledger,
        )


def simulate_flow_energy(instance: Instance, epsilon: float) -> EnergyFlowResult:
    """Run the flow+energy rejection policy on an instance."""
    return FlowEnergyScheduler(instance, epsilon).run()


def monotonicity_check(instance: Instance, extra: Job, epsilon: float) -> bool:
    """
    Compare V(t) on one machine with and without an extra job.

    Both runs use the first machine's volumes only. Returns True iff
    V_with(t) >= V_without(t) (relative 1e-9) at every event time of either run.
    """
    base = instance.restricted_to_machine(0) if instance.machines > 1 else instance
    extra_single = Job(id=extra.id, release=extra.release, proc=(extra.proc[0],),
                       weight=extra.weight, deadline=extra.deadline)
    without = simulate_flow_energy(base, epsilon) if base.jobs else None
    with_extra = simulate_flow_energy(base.with_job(extra_single), epsilon)

    times = set(with_extra.event_times())
    if without is not None:
        times.update(without.event_times())
    grid = np.asarray(sorted(times), dtype=float)
    v_with = np.asarray(with_extra.V(0, grid))
    v_without = np.asarray(without.V(0, grid)) if without is not None else np.zeros_like(grid)
    tolerance = np.maximum(1e-9 * np.abs(v_without), 1e-12)
    return bool(np.all(v_with >= v_without - tolerance))
