"""
Adaptive adversaries for the lower-bound constructions.

lb1_adversary targets flow-time engines that must decide how to start long jobs;
lb2_adversary targets energy engines that commit a (start, speed) at release.
Both release jobs depending on what the engine already did, build their own
offline schedule and validate it before reporting a ratio.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from model.instance_model import ExecutionRecord, Instance, Job, Model, Outcome
from scheduler.energy_min import (
    GreedyEnergyScheduler, Grids, PowerFunction, Strategy, configuration_energy, default_mu,
)
from scheduler.flowtime import simulate_flow
from scheduler.rejection import inverse_epsilon
from utils.errors import EngineCommitError, GridError, ParameterError
from utils.helpers import ratio, tolerance_for

logger = logging.getLogger(__name__)

LB2_GRID = Grids(speeds=(1.0, 2.0, 4.0, 8.0), time_step=1.0)


@dataclass
class AdversaryTranscript:
    """Released jobs, the engine decisions they reacted to, both costs and the ratio."""
    adversary: str
    jobs: List[Job]
    decisions: List[Dict[str, Any]]
    algorithm_cost: float
    adversary_cost: float
    adversary_schedule: List[ExecutionRecord]
    parameters: Dict[str, Any] = field(default_factory=dict)
    issues: List[str] = field(default_factory=list)
    note: str = ""

    @property
    def ratio(self) -> float:
        return ratio(self.algorithm_cost, self.adversary_cost)

    @property
    def feasible(self) -> bool:
        return not self.issues

    def to_dict(self) -> Dict[str, Any]:
        return {
            'adversary': self.adversary,
            'parameters': dict(self.parameters),
            'jobs': [job.to_dict() for job in self.jobs],
            'decisions': list(self.decisions),
            'algorithm_cost': self.algorithm_cost,
            'adversary_cost': self.adversary_cost,
            'ratio': self.ratio,
            'adversary_schedule': [record.to_dict() for record in self.adversary_schedule],
            'feasible': self.feasible,
            'issues': list(self.issues),
            'note': self.note,
        }


def validate_schedule(jobs: Sequence[Job], schedule: Sequence[ExecutionRecord],
                      max_speed: Optional[float] = None) -> List[str]:
    """
    Independent feasibility check of an offline schedule.

    Every job runs exactly once, inside [release, deadline], for exactly its volume,
    and executions on one machine do not overlap.
    """
    issues = []
    by_id = {job.id: job for job in jobs}
    seen = set()
    for record in schedule:
        job = by_id.get(record.job)
        if job is None:
            issues.append(f"unknown job {record.job}")
            continue
        if record.job in seen:
            issues.append(f"job {record.job} scheduled twice")
        seen.add(record.job)
        if record.start is None or record.start < job.release - tolerance_for(job.release):
            issues.append(f"job {record.job} starts before its release")
            continue
        if max_speed is not None and record.speed > max_speed + tolerance_for(max_speed):
            issues.append(f"job {record.job} runs faster than {max_speed}")
        expected_end = record.start + job.p(record.machine) / record.speed
        if abs(record.end - expected_end) > tolerance_for(expected_end):
            issues.append(f"job {record.job} does not process its volume")
        if job.deadline is not None and record.end > job.deadline + tolerance_for(job.deadline):
            issues.append(f"job {record.job} misses its deadline")
    for job in jobs:
        if job.id not in seen:
            issues.append(f"job {job.id} not scheduled")

    machines = {record.machine for record in schedule}
    for machine in machines:
        runs = sorted((r for r in schedule if r.machine == machine and r.start is not None),
                      key=lambda r: (r.start, r.end))
        for first, second in zip(runs, runs[1:]):
            if second.start < first.end - tolerance_for(first.end):
                issues.append(f"jobs {first.job} and {second.job} overlap on machine {machine}")
    return issues


def _flow_cost(jobs: Sequence[Job], schedule: Sequence[ExecutionRecord]) -> float:
    releases = {job.id: job.release for job in jobs}
    return float(sum(record.end - releases[record.job] for record in schedule))


def lb1_adversary(epsilon: float, L: float, engine: Optional[Callable[[Instance], Any]] = None
                  ) -> AdversaryTranscript:
    """
    Long-jobs-then-stream adversary on one machine.

    Releases 1/eps jobs of length L at time 0 and reads the first start t. If
    t > L^2 it stops: the adversary runs the long jobs back to back from 0.
    Otherwise it releases a job of length 1/L every 1/L from t until t + L; the
    adversary runs each short job at its release and then the long jobs back to
    back from t + L.

    Args:
        epsilon: Rejection parameter; 1/eps must be an integer
        L: Long-job length
        engine: Maps an instance to a run exposing trace.records and total_flow;
            defaults to the flow-time rejection policy at epsilon
    """
    q = inverse_epsilon(epsilon)
    if not (L > 0):
        raise ParameterError("L must be positive")
    if engine is None:
        engine = lambda instance: simulate_flow(instance, epsilon)  # noqa: E731

    long_jobs = [Job(id=k, release=0.0, proc=(float(L),)) for k in range(q)]
    first_run = engine(Instance(machines=1, jobs=tuple(long_jobs), model=Model.FLOW))
    starts = [record.start for record in first_run.trace.records.values() if record.start is not None]
    first_start = min(starts) if starts else math.inf
    decisions = [{'observed': 'first_start', 'time': None if math.isinf(first_start) else first_start}]
    parameters = {'epsilon': epsilon, 'L': L}

    if first_start > L * L:
        schedule = [ExecutionRecord(job=job.id, machine=0, start=k * L, speed=1.0,
                                    end=(k + 1) * L, outcome=Outcome.COMPLETED)
                    for k, job in enumerate(long_jobs)]
        issues = validate_schedule(long_jobs, schedule, max_speed=1.0)
        transcript = AdversaryTranscript(
            adversary='lb1', jobs=long_jobs, decisions=decisions,
            algorithm_cost=float(first_run.total_flow), adversary_cost=_flow_cost(long_jobs, schedule),
            adversary_schedule=schedule, parameters=parameters, issues=issues,
            note=f"engine idled until {first_start}; no short jobs released")
        logger.info(f"lb1 eps={epsilon} L={L}: idle branch, ratio={transcript.ratio:.6g}")
        return transcript

    count = int(round(L * L))
    short_jobs = [Job(id=q + k, release=first_start + k / L, proc=(1.0 / L,)) for k in range(count)]
    jobs = long_jobs + short_jobs
    result = engine(Instance(machines=1, jobs=tuple(jobs), model=Model.FLOW))

    schedule = [ExecutionRecord(job=job.id, machine=0, start=job.release, speed=1.0,
                                end=job.release + 1.0 / L, outcome=Outcome.COMPLETED)
                for job in short_jobs]
    cursor = first_start + count / L
    for job in long_jobs:
        schedule.append(ExecutionRecord(job=job.id, machine=0, start=cursor, speed=1.0,
                                        end=cursor + L, outcome=Outcome.COMPLETED))
        cursor += L
    issues = validate_schedule(jobs, schedule, max_speed=1.0)
    decisions.append({'observed': 'short_jobs_released', 'count': count,
                      'from': first_start, 'until': first_start + count / L})

    transcript = AdversaryTranscript(
        adversary='lb1', jobs=jobs, decisions=decisions,
        algorithm_cost=float(result.total_flow), adversary_cost=_flow_cost(jobs, schedule),
        adversary_schedule=schedule, parameters=parameters, issues=issues)
    logger.info(f"lb1 eps={epsilon} L={L}: {len(jobs)} jobs, alg={transcript.algorithm_cost:.6g}, "
                f"adv={transcript.adversary_cost:.6g}, ratio={transcript.ratio:.6g}")
    return transcript


def default_lb2_engine(alpha: float, grids: Grids = LB2_GRID) -> GreedyEnergyScheduler:
    """Single-machine greedy engine with the analytic (alpha^(alpha-1), (alpha-1)/alpha) smoothness pair."""
    return GreedyEnergyScheduler(1, grids, PowerFunction.power_law(alpha),
                                 lam=alpha ** (alpha - 1.0), mu=default_mu(alpha))


def _checked_commit(engine, job: Job) -> Strategy:
    try:
        strategy = engine.assign(job)
    except GridError as e:
        raise EngineCommitError(f"engine could not place job {job.id}: {e}") from e
    if strategy is None or strategy.job != job.id:
        raise EngineCommitError(f"engine returned no execution for job {job.id}")
    end = strategy.start + job.p(strategy.machine) / strategy.speed
    if (strategy.start < job.release - tolerance_for(job.release)
            or abs(strategy.end - end) > tolerance_for(end)
            or strategy.end > job.deadline + tolerance_for(job.deadline)):
        raise EngineCommitError(f"engine committed an infeasible execution for job {job.id}: {strategy}")
    return strategy


def lb2_adversary(alpha: int, engine=None) -> AdversaryTranscript:
    """
    Nested-window adversary for energy engines that commit at release.

    Job 1 has window [0, 3^(alpha+1)]; each next job has window
    [S_j + 1, C_j] from the engine's last commitment. Every job has a third of
    its window as volume. Release stops after alpha jobs or when the next
    window is no longer than 1. The adversary runs every job at speed 1, after
    the engine's completion when it fits the window, else at its release; the
    last job always runs at its release.

    Raises:
        ParameterError: If alpha is not an integer >= 2
        EngineCommitError: If the engine commits no valid execution
    """
    if int(alpha) != alpha or alpha < 2:
        raise ParameterError("lb2 needs an integer alpha >= 2")
    alpha = int(alpha)
    if engine is None:
        engine = default_lb2_engine(alpha)
    power = PowerFunction.power_law(alpha)

    jobs: List[Job] = []
    strategies: List[Strategy] = []
    decisions: List[Dict[str, Any]] = []
    release, deadline = 0.0, float(3 ** (alpha + 1))
    while True:
        job = Job(id=len(jobs), release=release, proc=((deadline - release) / 3.0,),
                  weight=1.0, deadline=deadline)
        strategy = _checked_commit(engine, job)
        jobs.append(job)
        strategies.append(strategy)
        decisions.append({'job': job.id, 'start': strategy.start, 'speed': strategy.speed,
                          'end': strategy.end})
        release, deadline = strategy.start + 1.0, strategy.end
        if len(jobs) == alpha or deadline - release <= 1.0:
            break

    schedule = []
    for k, (job, strategy) in enumerate(zip(jobs, strategies)):
        p = job.p(0)
        last = k == len(jobs) - 1
        if not last and strategy.end + p <= job.deadline:
            start = strategy.end
        elif last or job.release + p <= strategy.start + 1.0:
            start = job.release
        else:
            raise EngineCommitError(f"no speed-1 placement for job {job.id} outside later windows")
        schedule.append(ExecutionRecord(job=job.id, machine=0, start=start, speed=1.0,
                                        end=start + p, outcome=Outcome.COMPLETED))
    issues = validate_schedule(jobs, schedule, max_speed=1.0)

    algorithm_cost = configuration_energy(strategies, 0, power)
    adversary_cost = float(sum((r.end - r.start) * power(r.speed) for r in schedule))
    transcript = AdversaryTranscript(
        adversary='lb2', jobs=jobs, decisions=decisions,
        algorithm_cost=float(algorithm_cost), adversary_cost=adversary_cost,
        adversary_schedule=schedule, parameters={'alpha': alpha}, issues=issues)
    logger.info(f"lb2 alpha={alpha}: {len(jobs)} jobs, alg={transcript.algorithm_cost:.6g}, "
                f"adv={adversary_cost:.6g}, ratio={transcript.ratio:.6g}")
    return transcript
