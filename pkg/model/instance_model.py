"""
Instance and trace model for the rejection schedulers.
Defines jobs, instances, execution records and schedule traces, their JSON/CSV
serialization, and the seeded random instance generator.
"""

import json
import math
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import numpy as np
import pandas as pd

from utils.errors import InstanceError, ParameterError

logger = logging.getLogger(__name__)


class Model(str, Enum):
    """Objective family an instance belongs to."""
    FLOW = "flow"
    FLOW_ENERGY = "flow_energy"
    ENERGY_DEADLINE = "energy_deadline"


class Outcome(str, Enum):
    """Final state of a job in a trace."""
    COMPLETED = "completed"
    REJECTED_RULE1 = "rejected_rule1"
    REJECTED_RULE2 = "rejected_rule2"
    REJECTED_WEIGHT_COUNTER = "rejected_weight_counter"
    NEVER_STARTED = "never_started"

    @property
    def is_rejection(self) -> bool:
        return self in (Outcome.REJECTED_RULE1, Outcome.REJECTED_RULE2,
                        Outcome.REJECTED_WEIGHT_COUNTER)


class EventKind(str, Enum):
    DISPATCH = "dispatch"
    START = "start"
    COMPLETE = "complete"
    REJECT = "reject"
    DEFINITIVE_FINISH = "definitive_finish"


@dataclass(frozen=True)
class Job:
    """A job with release time, weight, per-machine volumes and optional deadline."""
    id: int
    release: float
    proc: Tuple[float, ...]
    weight: float = 1.0
    deadline: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'proc', tuple(float(p) for p in self.proc))
        object.__setattr__(self, 'release', float(self.release))
        object.__setattr__(self, 'weight', float(self.weight))
        if self.deadline is not None:
            object.__setattr__(self, 'deadline', float(self.deadline))

        if self.release < 0 or not math.isfinite(self.release):
            raise InstanceError(f"job {self.id}: release must be a non-negative finite time")
        if len(self.proc) == 0:
            raise InstanceError(f"job {self.id}: empty processing vector")
        if any(not (p > 0) or not math.isfinite(p) for p in self.proc):
            raise InstanceError(f"job {self.id}: processing volumes must be positive")
        if not (self.weight > 0):
            raise InstanceError(f"job {self.id}: weight must be positive")
        if self.deadline is not None and self.deadline <= self.release:
            raise InstanceError(f"job {self.id}: deadline before release")

    def p(self, machine: int) -> float:
        """Processing volume on a machine."""
        return self.proc[machine]

    def density(self, machine: int) -> float:
        return self.weight / self.proc[machine]

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'id': self.id,
            'release': self.release,
            'weight': self.weight,
            'proc': list(self.proc),
        }
        if self.deadline is not None:
            data['deadline'] = self.deadline
        return data


@dataclass(frozen=True)
class Instance:
    """Job set on m machines, in canonical (release, id) arrival order."""
    machines: int
    jobs: Tuple[Job, ...]
    model: Model = Model.FLOW
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'model', Model(self.model))
        if not isinstance(self.machines, int) or self.machines < 1:
            raise InstanceError("machines must be a positive integer")
        if self.alpha is not None:
            object.__setattr__(self, 'alpha', float(self.alpha))
            if not (self.alpha > 1):
                raise InstanceError("alpha must be greater than 1")

        jobs = list(self.jobs)
        ids = [job.id for job in jobs]
        if len(ids) != len(set(ids)):
            raise InstanceError("job ids must be unique")
        for job in jobs:
            if len(job.proc) != self.machines:
                raise InstanceError(
                    f"job {job.id}: proc has {len(job.proc)} entries for {self.machines} machines")
            if self.model == Model.ENERGY_DEADLINE and job.deadline is None:
                raise InstanceError(f"job {job.id}: energy_deadline model requires a deadline")

        # Flow model is unweighted
        if self.model == Model.FLOW:
            jobs = [job if job.weight == 1.0 else replace(job, weight=1.0) for job in jobs]

        jobs.sort(key=lambda job: (job.release, job.id))
        object.__setattr__(self, 'jobs', tuple(jobs))

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> Job:
        for job in self.jobs:
            if job.id == job_id:
                return job
        raise KeyError(job_id)

    def job_map(self) -> Dict[int, Job]:
        return {job.id: job for job in self.jobs}

    def total_weight(self) -> float:
        return float(sum(job.weight for job in self.jobs))

    def restricted_to_machine(self, machine: int) -> 'Instance':
        """Single-machine copy keeping only the volumes of one machine."""
        jobs = tuple(replace(job, proc=(job.proc[machine],)) for job in self.jobs)
        return Instance(machines=1, jobs=jobs, model=self.model, alpha=self.alpha)

    def with_job(self, job: Job) -> 'Instance':
        return Instance(machines=self.machines, jobs=self.jobs + (job,),
                        model=self.model, alpha=self.alpha)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'model': self.model.value, 'machines': self.machines}
        if self.alpha is not None:
            data['alpha'] = self.alpha
        data['jobs'] = [job.to_dict() for job in self.jobs]
        return data


@dataclass(frozen=True)
class ExecutionRecord:
    """How one job was executed: machine, interval, speed and outcome."""
    job: int
    machine: int
    start: Optional[float]
    speed: float
    end: float
    outcome: Outcome

    def to_dict(self) -> Dict[str, Any]:
        return {
            'job': self.job,
            'machine': self.machine,
            'start': self.start,
            'speed': self.speed,
            'end': self.end,
            'outcome': self.outcome.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExecutionRecord':
        start = data.get('start')
        return cls(
            job=int(data['job']),
            machine=int(data['machine']),
            start=None if start is None else float(start),
            speed=float(data['speed']),
            end=float(data['end']),
            outcome=Outcome(data['outcome']),
        )


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: EventKind
    job: int
    machine: int

    def to_dict(self) -> Dict[str, Any]:
        return {'time': self.time, 'kind': self.kind.value, 'job': self.job, 'machine': self.machine}


@dataclass
class ScheduleTrace:
    """Time-ordered event log plus per-job execution records."""
    model: Model
    records: Dict[int, ExecutionRecord]
    events: List[TraceEvent]
    objective: float
    definitive_finish: Dict[int, float] = field(default_factory=dict)

    @property
    def rejected_ids(self) -> FrozenSet[int]:
        return frozenset(job_id for job_id, record in self.records.items()
                         if record.outcome.is_rejection)

    def machine_records(self, machine: int) -> List[ExecutionRecord]:
        """Records that occupied a machine, ordered by start time."""
        executed = [r for r in self.records.values()
                    if r.machine == machine and r.start is not None]
        return sorted(executed, key=lambda r: (r.start, r.job))

    def validate(self, instance: Optional[Instance] = None) -> List[str]:
        """
        Check structural invariants of the trace.

        Returns:
            List[str]: Human-readable issues (empty if the trace is consistent)
        """
        issues = []
        times = [event.time for event in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            issues.append("events are not ordered by time")

        for job_id, record in self.records.items():
            if record.outcome == Outcome.NEVER_STARTED:
                issues.append(f"job {job_id} left unresolved")
            if record.start is not None and record.end < record.start:
                issues.append(f"job {job_id} ends before it starts")
            finish = self.definitive_finish.get(job_id)
            if finish is not None and finish < record.end:
                issues.append(f"job {job_id} definitively finishes before C_j")

        if instance is not None:
            if set(self.records) != {job.id for job in instance.jobs}:
                issues.append("records do not cover the instance jobs exactly once")
            jobs = instance.job_map()
            for record in self.records.values():
                job = jobs.get(record.job)
                if job is None:
                    continue
                if record.start is not None and record.start < job.release:
                    issues.append(f"job {record.job} starts before its release")
                if (instance.model == Model.FLOW and record.outcome == Outcome.COMPLETED
                        and record.end - record.start != job.p(record.machine)):
                    issues.append(f"job {record.job} does not run for exactly p_ij")

        # A machine runs at most one job at a time in the flow engines
        if self.model != Model.ENERGY_DEADLINE:
            machines = {record.machine for record in self.records.values()}
            for machine in machines:
                executed = self.machine_records(machine)
                for first, second in zip(executed, executed[1:]):
                    if second.start < first.end:
                        issues.append(f"machine {machine}: jobs {first.job} and {second.job} overlap")
        return issues

    def to_dict(self) -> Dict[str, Any]:
        return {
            'model': self.model.value,
            'objective': self.objective,
            'rejected_ids': sorted(self.rejected_ids),
            'records': [self.records[job_id].to_dict() for job_id in sorted(self.records)],
            'events': [event.to_dict() for event in self.events],
            'definitive_finish': {str(k): v for k, v in sorted(self.definitive_finish.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScheduleTrace':
        records = [ExecutionRecord.from_dict(item) for item in data.get('records', [])]
        events = [TraceEvent(time=float(e['time']), kind=EventKind(e['kind']),
                             job=int(e['job']), machine=int(e['machine']))
                  for e in data.get('events', [])]
        finish = {int(k): float(v) for k, v in data.get('definitive_finish', {}).items()}
        return cls(
            model=Model(data['model']),
            records={record.job: record for record in records},
            events=events,
            objective=float(data['objective']),
            definitive_finish=finish,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> 'ScheduleTrace':
        return cls.from_dict(json.loads(text))

    def to_frame(self) -> pd.DataFrame:
        """Records as a DataFrame with the export columns job,machine,start,speed,end,outcome."""
        rows = [self.records[job_id].to_dict() for job_id in sorted(self.records)]
        return pd.DataFrame(rows, columns=['job', 'machine', 'start', 'speed', 'end', 'outcome'])


def parse_instance(text: str) -> Instance:
    """
    Parse an instance from its JSON text.

    Args:
        text: JSON document {"model", "machines", "alpha"?, "jobs": [...]}

    Returns:
        Instance: Validated instance in canonical arrival order

    Raises:
        InstanceError: On malformed JSON or invalid job data
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"malformed instance JSON: {e}") from e
    if not isinstance(data, dict):
        raise InstanceError("instance JSON must be an object")

    try:
        model = Model(data.get('model', Model.FLOW.value))
    except ValueError as e:
        raise InstanceError(f"unknown model: {data.get('model')}") from e

    try:
        machines = data['machines']
        raw_jobs = data['jobs']
    except KeyError as e:
        raise InstanceError(f"missing field {e}") from e
    if not isinstance(machines, int) or isinstance(machines, bool):
        raise InstanceError("machines must be an integer")

    jobs = []
    for item in raw_jobs:
        try:
            jobs.append(Job(
                id=int(item['id']),
                release=item['release'],
                proc=tuple(item['proc']),
                weight=item.get('weight', 1.0),
                deadline=item.get('deadline'),
            ))
        except InstanceError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise InstanceError(f"malformed job entry {item!r}: {e}") from e

    return Instance(machines=machines, jobs=tuple(jobs), model=model, alpha=data.get('alpha'))


def serialize_instance(instance: Instance) -> str:
    """Serialize an instance to the JSON schema read by parse_instance."""
    return json.dumps(instance.to_dict(), indent=2)


def gen_random(seed: int, n: int, m: int,
               p_range: Tuple[float, float] = (1.0, 10.0),
               w_range: Tuple[float, float] = (1.0, 1.0),
               horizon: float = 20.0,
               model: Model = Model.FLOW,
               alpha: Optional[float] = None,
               time_step: Optional[float] = None,
               deadline_slack: Tuple[float, float] = (1.0, 3.0)) -> Instance:
    """
    Generate a seeded random instance.

    Releases are uniform on [0, horizon], p_ij uniform on p_range independently
    per (i, j), weights uniform on w_range (forced to 1 for the flow model).
    With time_step set, releases are floored and volumes/windows rounded up to
    multiples of the step. Energy-deadline jobs get a window of
    slack * max_i p_ij with slack uniform on deadline_slack, so speed 1 is
    always feasible.

    Args:
        seed: Random seed
        n: Number of jobs
        m: Number of machines
        p_range: (lo, hi) for processing volumes
        w_range: (lo, hi) for weights
        horizon: Release horizon
        model: Instance model
        alpha: Power exponent for speed-scaling models
        time_step: Optional grid for integral instances
        deadline_slack: (lo, hi) window multiplier for deadlines

    Returns:
        Instance: Deterministic for a fixed argument tuple
    """
    model = Model(model)
    p_lo, p_hi = p_range
    w_lo, w_hi = w_range
    s_lo, s_hi = deadline_slack
    if n < 1 or m < 1:
        raise ParameterError("n and m must be at least 1")
    if not (0 < p_lo <= p_hi) or not (0 < w_lo <= w_hi):
        raise ParameterError("invalid p_range or w_range")
    if horizon < 0:
        raise ParameterError("horizon must be non-negative")
    if not (1 <= s_lo <= s_hi):
        raise ParameterError("deadline_slack must satisfy 1 <= lo <= hi")
    if time_step is not None and not (time_step > 0):
        raise ParameterError("time_step must be positive")
    if model != Model.FLOW and alpha is None:
        alpha = 2.0

    rng = np.random.default_rng(seed)
    releases = rng.uniform(0.0, horizon, size=n)
    proc = rng.uniform(p_lo, p_hi, size=(n, m))
    weights = rng.uniform(w_lo, w_hi, size=n)
    slack = rng.uniform(s_lo, s_hi, size=n)

    jobs = []
    for k in range(n):
        release = float(releases[k])
        volumes = [float(p) for p in proc[k]]
        if time_step is not None:
            release = math.floor(release / time_step) * time_step
            volumes = [max(1, math.ceil(p / time_step)) * time_step for p in volumes]
        deadline = None
        if model == Model.ENERGY_DEADLINE:
            window = float(slack[k]) * max(volumes)
            if time_step is not None:
                window = math.ceil(window / time_step) * time_step
            deadline = release + window
        jobs.append(Job(
            id=k,
            release=release,
            proc=tuple(volumes),
            weight=1.0 if model == Model.FLOW else float(weights[k]),
            deadline=deadline,
        ))

    return Instance(machines=m, jobs=tuple(jobs), model=model,
                    alpha=None if model == Model.FLOW else alpha)
