"""
Online non-preemptive total flow-time scheduler with rejection.

Jobs are dispatched on arrival to the machine minimizing lambda_ij, each machine
processes its pending jobs in SPT order, and two counters decide rejections:
Rule 1 interrupts the running job after 1/eps arrivals during its execution,
Rule 2 rejects the largest pending job every 1 + 1/eps dispatches.
The run also builds the dual variables lambda_j and beta_i(t).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from sortedcontainers import SortedList

from model.instance_model import (
    EventKind, ExecutionRecord, Instance, Job, Model, Outcome, ScheduleTrace, TraceEvent,
)
from scheduler.rejection import RejectionEvent, RejectionLedger, RejectionRules, inverse_epsilon
from utils.errors import MappingConstructionError, ModelMismatchError, ParameterError
from utils.helpers import tolerance_for
from utils.step_function import PiecewiseConstantFunction

logger = logging.getLogger(__name__)


def flow_order_key(job: Job, machine: int) -> Tuple[float, float, int]:
    """SPT key: processing time, then release, then id."""
    return (job.p(machine), job.release, job.id)


def order_precedes(a: Job, b: Job, machine: int) -> bool:
    """True iff a comes strictly before b in the SPT order of a machine."""
    return flow_order_key(a, machine) < flow_order_key(b, machine)


@dataclass
class RunningJob:
    job: Job
    start: float
    end: float

    def remaining(self, t: float) -> float:
        """Remaining volume q_ik(t) at unit speed."""
        return self.end - t


class MachineStateFlow:
    """Pending set, running job and rejection counters of one machine."""

    def __init__(self, index: int):
        self.index = index
        self.pending = SortedList(key=lambda job: flow_order_key(job, index))
        self.running: Optional[RunningJob] = None
        self.c = 0
        self.v = 0

    def __repr__(self):
        running = self.running.job.id if self.running else None
        return (f"MachineStateFlow(index={self.index}, pending={[j.id for j in self.pending]}, "
                f"running={running}, c={self.c}, v={self.v})")


def lambda_i(job: Job, machine: int, state: MachineStateFlow, epsilon: float) -> float:
    """
    Dispatch cost of a job on a machine.

    (1/eps)*p_ij + sum of p_il over pending jobs preceding j (j included)
    + p_ij for every pending job succeeding j. The running job is excluded.
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    p = job.p(machine)
    key = flow_order_key(job, machine)
    preceding = p
    succeeding = 0
    for other in state.pending:
        if flow_order_key(other, machine) < key:
            preceding += other.p(machine)
        else:
            succeeding += 1
    return p / epsilon + preceding + succeeding * p


@dataclass(frozen=True)
class Dispatch:
    """Dispatch decision: target machine, recorded lambda_j and all lambda_ij."""
    machine: int
    value: float
    candidates: Tuple[float, ...]


def dispatch_flow(job: Job, states: Sequence[MachineStateFlow], epsilon: float) -> Dispatch:
    """Pick argmin_i lambda_ij (lowest index on ties); lambda_j = eps/(1+eps) * min."""
    candidates = tuple(lambda_i(job, state.index, state, epsilon) for state in states)
    best = min(range(len(candidates)), key=lambda i: (candidates[i], i))
    return Dispatch(machine=best,
                    value=epsilon / (1.0 + epsilon) * candidates[best],
                    candidates=candidates)


@dataclass
class FlowResult:
    """Outcome of a flow-time run together with its dual variables."""
    instance: Instance
    epsilon: float
    rules: RejectionRules
    trace: ScheduleTrace
    lambdas: Dict[int, float]
    dispatch: Dict[int, int]
    beta_counts: List[PiecewiseConstantFunction]
    ledger: RejectionLedger
    counter_history: Dict[int, List[Tuple[float, int]]] = field(default_factory=dict)

    @property
    def beta_coefficient(self) -> float:
        return self.epsilon / (1.0 + self.epsilon) ** 2

    def beta(self, machine: int, t: float) -> float:
        """beta_i(t), right limit at event times."""
        return self.beta_coefficient * self.beta_counts[machine].call(t)

    @property
    def total_flow(self) -> float:
        jobs = self.instance.job_map()
        return float(sum(record.end - jobs[job_id].release
                         for job_id, record in self.trace.records.items()))

    @property
    def definitive_flow(self) -> float:
        jobs = self.instance.job_map()
        return float(sum(finish - jobs[job_id].release
                         for job_id, finish in self.trace.definitive_finish.items()))

    @property
    def rejected_fraction(self) -> float:
        if self.instance.n == 0:
            return 0.0
        return len(self.trace.rejected_ids) / self.instance.n

    def beta_integral(self, machine: int) -> float:
        """Exact integral of beta_i over the whole run."""
        if not self.instance.jobs:
            return 0.0
        start = self.instance.jobs[0].release
        stop = max(self.trace.definitive_finish.values())
        return self.beta_coefficient * self.beta_counts[machine].integral(start, stop)

    def dual_objective(self) -> float:
        """sum lambda_j - sum_i integral beta_i."""
        return (float(sum(self.lambdas.values()))
                - sum(self.beta_integral(i) for i in range(self.instance.machines)))

    def event_times(self, machine: Optional[int] = None) -> List[float]:
        times = {event.time for event in self.trace.events
                 if machine is None or event.machine == machine}
        return sorted(times)

    def pending_at(self, machine: int, t: float) -> List[int]:
        """U_i(t): dispatched, released and not yet completed or rejected."""
        jobs = self.instance.job_map()
        return [job_id for job_id, record in self.trace.records.items()
                if record.machine == machine and jobs[job_id].release <= t < record.end]

    def rule2_rejected_at(self, machine: int, t: float) -> List[int]:
        """R_i(t): Rule-2 rejections that are not yet definitively finished."""
        return [job_id for job_id, record in self.trace.records.items()
                if record.machine == machine and record.outcome == Outcome.REJECTED_RULE2
                and record.end <= t < self.trace.definitive_finish[job_id]]

    def finishing_at(self, machine: int, t: float) -> List[int]:
        """V_i(t): past C_j but before the definitive finish."""
        return [job_id for job_id, record in self.trace.records.items()
                if record.machine == machine
                and record.end <= t < self.trace.definitive_finish[job_id]]

    def counter_at(self, machine: int, t: float) -> int:
        value = 0
        for time, count in self.counter_history.get(machine, []):
            if time > t:
                break
            value = count
        return value


class FlowTimeScheduler:
    """
    Event-driven simulation of the flow-time rejection policy.

    Completions at a time are processed before arrivals at the same time;
    simultaneous arrivals are handled one by one in id order. Each arrival is
    dispatched, then Rule 1 and Rule 2 run, then an idle machine starts a job.
    """

    def __init__(self, instance: Instance, epsilon: float, rules: Optional[RejectionRules] = None):
        if instance.model != Model.FLOW:
            raise ModelMismatchError(f"flow engine requires a flow instance, got {instance.model.value}")
        self.instance = instance
        self.epsilon = epsilon
        self.q = inverse_epsilon(epsilon)
        self.rules = rules or RejectionRules()

        self.states = [MachineStateFlow(i) for i in range(instance.machines)]
        self.ledger = RejectionLedger()
        self.events: List[TraceEvent] = []
        self.lambdas: Dict[int, float] = {}
        self.machine_of: Dict[int, int] = {}
        self.starts: Dict[int, Optional[float]] = {}
        self.ends: Dict[int, float] = {}
        self.outcomes: Dict[int, Outcome] = {}
        self.counter_history: Dict[int, List[Tuple[float, int]]] = {
            i: [] for i in range(instance.machines)}

        self.logger = logging.getLogger(__name__)

    def run(self) -> FlowResult:
        jobs = self.instance.jobs
        idx = 0
        while True:
            t_complete = min((s.running.end for s in self.states if s.running is not None),
                             default=math.inf)
            t_arrival = jobs[idx].release if idx < len(jobs) else math.inf
            if t_complete == math.inf and t_arrival == math.inf:
                break
            if t_complete <= t_arrival:
                for state in self.states:
                    if state.running is not None and state.running.end == t_complete:
                        self._complete(state, t_complete)
                        self._start_next(state, t_complete)
            else:
                self._arrive(jobs[idx], t_arrival)
                idx += 1

        result = self._build_result()
        self.logger.info(f"Flow run finished: n={self.instance.n}, eps={self.epsilon}, "
                         f"rules={self.rules.label}, total_flow={result.total_flow:.6g}, "
                         f"rejected={len(result.trace.rejected_ids)}")
        return result

    def _arrive(self, job: Job, t: float):
        decision = dispatch_flow(job, self.states, self.epsilon)
        state = self.states[decision.machine]
        self.lambdas[job.id] = decision.value
        self.machine_of[job.id] = decision.machine
        self.starts[job.id] = None
        self.outcomes[job.id] = Outcome.NEVER_STARTED
        self.events.append(TraceEvent(t, EventKind.DISPATCH, job.id, decision.machine))
        state.pending.add(job)

        if state.running is not None and self.rules.rule1:
            state.v += 1
            if state.v == self.q:
                self._reject_running(state, t, trigger=job)

        # Rule 2 sees the pending set before an idle machine picks its next job
        if self.rules.rule2:
            state.c += 1
            if state.c == self.q + 1:
                if len(state.pending) > 0:
                    self._reject_largest(state, t, trigger=job)
                state.c = 0
        self.counter_history[state.index].append((t, state.c))

        if state.running is None:
            self._start_next(state, t)

    def _start_next(self, state: MachineStateFlow, t: float):
        if state.running is not None or len(state.pending) == 0:
            return
        job = state.pending.pop(0)
        state.running = RunningJob(job=job, start=t, end=t + job.p(state.index))
        state.v = 0
        self.starts[job.id] = t
        self.events.append(TraceEvent(t, EventKind.START, job.id, state.index))

    def _complete(self, state: MachineStateFlow, t: float):
        job = state.running.job
        self.ends[job.id] = t
        self.outcomes[job.id] = Outcome.COMPLETED
        self.events.append(TraceEvent(t, EventKind.COMPLETE, job.id, state.index))
        state.running = None
        state.v = 0

    def _reject_running(self, state: MachineStateFlow, t: float, trigger: Job):
        """Rule 1: interrupt the running job."""
        running = state.running
        remaining = running.remaining(t)
        affected = tuple(job.id for job in state.pending if job.id != trigger.id) + (running.job.id,)
        self.ledger.record(RejectionEvent(
            time=t, machine=state.index, job=running.job.id, outcome=Outcome.REJECTED_RULE1,
            remaining=remaining, delay=remaining, trigger=trigger.id, affected=affected))
        self.ends[running.job.id] = t
        self.outcomes[running.job.id] = Outcome.REJECTED_RULE1
        self.events.append(TraceEvent(t, EventKind.REJECT, running.job.id, state.index))
        state.running = None
        state.v = 0

    def _reject_largest(self, state: MachineStateFlow, t: float, trigger: Job):
        """Rule 2: reject the pending job with the largest processing time."""
        i = state.index
        largest = state.pending.pop(-1)
        running_remaining = state.running.remaining(t) if state.running is not None else 0.0
        others = sum(job.p(i) for job in state.pending if job.id != trigger.id)
        own_term = running_remaining + others + largest.p(i)
        self.ledger.record(RejectionEvent(
            time=t, machine=i, job=largest.id, outcome=Outcome.REJECTED_RULE2,
            remaining=largest.p(i), delay=0.0, trigger=trigger.id, own_term=own_term))
        self.ends[largest.id] = t
        self.outcomes[largest.id] = Outcome.REJECTED_RULE2
        self.events.append(TraceEvent(t, EventKind.REJECT, largest.id, i))

    def _build_result(self) -> FlowResult:
        records = {}
        for job in self.instance.jobs:
            records[job.id] = ExecutionRecord(
                job=job.id,
                machine=self.machine_of[job.id],
                start=self.starts[job.id],
                speed=1.0,
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

        beta_counts = [PiecewiseConstantFunction(0) for _ in range(self.instance.machines)]
        for job in self.instance.jobs:
            beta_counts[self.machine_of[job.id]].add_interval(job.release, definitive[job.id], 1)

        total_flow = float(sum(records[job.id].end - job.release for job in self.instance.jobs))
        trace = ScheduleTrace(model=Model.FLOW, records=records, events=events,
                              objective=total_flow, definitive_finish=definitive)
        return FlowResult(
            instance=self.instance,
            epsilon=self.epsilon,
            rules=self.rules,
            trace=trace,
            lambdas=dict(self.lambdas),
            dispatch=dict(self.machine_of),
            beta_counts=beta_counts,
            ledger=self.ledger,
            counter_history=self.counter_history,
        )


def simulate_flow(instance: Instance, epsilon: float,
                  rules: Optional[RejectionRules] = None) -> FlowResult:
    """Run the flow-time rejection policy on an instance."""
    return FlowTimeScheduler(instance, epsilon, rules).run()


def _running_at(result: FlowResult, machine: int, t: float) -> Optional[int]:
    for job_id, record in result.trace.records.items():
        if record.machine == machine and record.start is not None and record.start <= t < record.end:
            return job_id
    return None


class PartitionReplay:
    """
    Rebuilds the pending-set partition of one machine event by event.

    Every Rule-2 rejection k owns a group of jobs charged to it until its
    definitive finish; the last group collects jobs dispatched since the most
    recent Rule-2 rejection. An arrival that is shorter than the largest
    waiting job of some charged groups takes the place of the shortest of
    those maxima, each displaced maximum moves to the group whose maximum is
    next in SPT order, and the longest one joins the last group.
    """

    def __init__(self, result: FlowResult, machine: int):
        self.result = result
        self.machine = machine
        self.jobs = result.instance.job_map()
        self.charged: Dict[int, List[int]] = {}
        self.last: List[int] = []
        self.running: Optional[int] = None
        # charged jobs finishing within rounding of their rejection's definitive finish
        self.settled: Set[int] = set()

    def _key(self, job_id: int) -> Tuple[float, float, int]:
        return flow_order_key(self.jobs[job_id], self.machine)

    def _group_of(self, job_id: int) -> List[int]:
        for group in self.charged.values():
            if job_id in group:
                return group
        if job_id in self.last:
            return self.last
        raise MappingConstructionError(f"machine {self.machine}: job {job_id} is in no group")

    def _largest_waiting(self, group: List[int]) -> Optional[int]:
        waiting = [job_id for job_id in group if job_id != self.running]
        return max(waiting, key=self._key) if waiting else None

    def arrive(self, job_id: int):
        key = self._key(job_id)
        displaced = []
        for group in self.charged.values():
            largest = self._largest_waiting(group)
            if largest is not None and key < self._key(largest):
                group.remove(largest)
                displaced.append((largest, group))
        displaced.sort(key=lambda item: self._key(item[0]))

        carry = job_id
        for largest, group in displaced:
            group.append(carry)
            carry = largest
        self.last.append(carry)

    def leave(self, job_id: int):
        if job_id in self.settled:
            self.settled.discard(job_id)
        else:
            self._group_of(job_id).remove(job_id)
        if job_id == self.running:
            self.running = None

    def reject_rule2(self, job_id: int):
        group = self._group_of(job_id)
        group.remove(job_id)
        if group is not self.last:
            substitute = self._largest_waiting(self.last)
            if substitute is not None:
                self.last.remove(substitute)
                group.append(substitute)
        self.charged[job_id] = self.last
        self.last = []

    def definitive_finish(self, job_id: int, t: float):
        group = self.charged.pop(job_id)
        unfinished = [k for k in group if self.result.trace.records[k].end > t + tolerance_for(t)]
        if unfinished:
            raise MappingConstructionError(
                f"machine {self.machine}, t={t}: jobs {sorted(unfinished)} charged to {job_id} "
                f"outlive its definitive finish")
        self.settled.update(group)

    def apply(self, event: TraceEvent):
        records = self.result.trace.records
        if event.kind == EventKind.DISPATCH:
            self.arrive(event.job)
        elif event.kind == EventKind.START:
            self.running = event.job
        elif event.kind == EventKind.COMPLETE:
            self.leave(event.job)
        elif event.kind == EventKind.REJECT:
            if records[event.job].outcome == Outcome.REJECTED_RULE2:
                self.reject_rule2(event.job)
            else:
                self.leave(event.job)
        elif event.kind == EventKind.DEFINITIVE_FINISH and event.job in self.charged:
            self.definitive_finish(event.job, event.time)

    def replay(self, t: float) -> 'PartitionReplay':
        for event in self.result.trace.events:
            if event.time > t:
                break
            if event.machine == self.machine:
                self.apply(event)
        return self

    def projected_completions(self, t: float) -> Dict[int, float]:
        """Completion times at t assuming no further releases."""
        pending = self.result.pending_at(self.machine, t)
        running = _running_at(self.result, self.machine, t)
        projected: Dict[int, float] = {}
        cursor = t
        if running is not None:
            cursor = self.result.trace.records[running].start + self.jobs[running].p(self.machine)
            projected[running] = cursor
        for job_id in sorted((k for k in pending if k != running), key=self._key):
            cursor += self.jobs[job_id].p(self.machine)
            projected[job_id] = cursor
        return projected

    def groups(self) -> List[List[int]]:
        """Charged groups by definitive finish of their rejection, then the last group."""
        finish = self.result.trace.definitive_finish
        ordered = sorted(self.charged, key=lambda k: (finish[k], k))
        return ([sorted(self.charged[k], key=self._key) for k in ordered]
                + [sorted(self.last, key=self._key)])

    def check(self, t: float):
        """
        Check the partition at t.

        Raises:
            MappingConstructionError: If the groups miss a pending job, a charged
                group exceeds 1/eps, the last group exceeds the Rule-2 counter or
                a job is projected to finish after its rejection's definitive finish
        """
        where = f"machine {self.machine}, t={t}"
        finish = self.result.trace.definitive_finish
        members = sorted(job_id for group in self.groups() for job_id in group)
        if members != sorted(self.result.pending_at(self.machine, t)):
            raise MappingConstructionError(f"{where}: groups {members} differ from the pending set")
        if sorted(self.charged) != sorted(self.result.rule2_rejected_at(self.machine, t)):
            raise MappingConstructionError(f"{where}: charged rejections {sorted(self.charged)} "
                                           f"differ from the unfinished Rule-2 rejections")

        q = inverse_epsilon(self.result.epsilon)
        counter = self.result.counter_at(self.machine, t)
        if len(self.last) > counter:
            raise MappingConstructionError(
                f"{where}: {len(self.last)} jobs in the last group for a counter of {counter}")

        projected = self.projected_completions(t)
        for rejected, group in self.charged.items():
            if len(group) > q:
                raise MappingConstructionError(
                    f"{where}: {len(group)} jobs charged to {rejected}, more than {q}")
            deadline = finish[rejected]
            late = [k for k in group if projected[k] > deadline + tolerance_for(deadline)]
            if late:
                raise MappingConstructionError(
                    f"{where}: jobs {sorted(late)} projected after the definitive finish "
                    f"{deadline} of {rejected}")


def mapping_witness(result: FlowResult, machine: int, t: float) -> List[List[int]]:
    """
    Partition U_i(t) into r+1 groups, r = |R_i(t)|.

    The groups are rebuilt by replaying the machine's events up to t. Group
    l <= r is charged to the l-th unfinished Rule-2 rejection by definitive
    finish and holds at most 1/eps jobs whose projected completion, assuming
    no more releases, is no later than that definitive finish. The last group,
    job in service included, never exceeds the current Rule-2 counter.

    Raises:
        ParameterError: If Rule 2 is disabled
        MappingConstructionError: If the replayed partition breaks a bound
    """
    if not result.rules.rule2:
        raise ParameterError("the pending-set partition needs Rule 2")
    replay = PartitionReplay(result, machine).replay(t)
    replay.check(t)
    return replay.groups()
