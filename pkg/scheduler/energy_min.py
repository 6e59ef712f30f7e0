"""
Greedy primal-dual engine for deadline-constrained energy minimization.

Every job chooses, at its release, the strategy (machine, start, speed) of least
marginal energy against the current load profile and commits to it. Jobs on one
machine may overlap; their speeds add up. Dual variables follow the smoothness
argument: beta = marginal / lambda, delta = chosen marginal / lambda,
gamma_i = -(mu / lambda) * f_i(final assignment).
"""

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from model.instance_model import (
    EventKind, ExecutionRecord, Instance, Job, Model, Outcome, ScheduleTrace, TraceEvent,
)
from utils.errors import GridError, ModelMismatchError, ParameterError
from utils.step_function import PiecewiseConstantFunction

logger = logging.getLogger(__name__)


class PowerFunction:
    """Power as a function of speed; accepts scalars and numpy arrays."""

    def __init__(self, fn, name: str, alpha: Optional[float] = None):
        self._fn = fn
        self.name = name
        self.alpha = alpha

    @classmethod
    def power_law(cls, alpha: float) -> 'PowerFunction':
        """P(s) = s^alpha."""
        if not (alpha >= 1):
            raise ParameterError("power-law exponent must be at least 1")
        return cls(lambda s: np.power(s, alpha), name=f"s^{alpha:g}", alpha=alpha)

    @classmethod
    def from_table(cls, speeds: Sequence[float], powers: Sequence[float]) -> 'PowerFunction':
        """
        Piecewise-linear interpolation of a measured speed/power table.

        Speeds above the table are extrapolated with the last slope; P(0) = 0.
        """
        xs = np.asarray(speeds, dtype=float)
        ys = np.asarray(powers, dtype=float)
        if xs.ndim != 1 or len(xs) != len(ys) or len(xs) == 0:
            raise ParameterError("power table needs matching non-empty speed and power lists")
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        if xs[0] > 0:
            xs = np.concatenate(([0.0], xs))
            ys = np.concatenate(([0.0], ys))
        if len(xs) > 1:
            tail_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        else:
            tail_slope = 0.0

        def table(s):
            s_arr = np.asarray(s, dtype=float)
            values = np.interp(s_arr, xs, ys)
            values = np.where(s_arr > xs[-1], ys[-1] + tail_slope * (s_arr - xs[-1]), values)
            return values if values.ndim else float(values)

        return cls(table, name="table")

    def __call__(self, s):
        return self._fn(s)

    def __repr__(self):
        return f"PowerFunction({self.name})"


def build_speed_grid(v_min: float, v_max: float, eps_disc: float, alpha: float) -> List[float]:
    """
    Geometric speed grid from v_min to v_max.

    Consecutive speeds differ by (1+eps_disc)^(1/(alpha-1)), so rounding a speed
    up to the grid inflates the energy per unit volume of P = s^alpha by at
    most (1+eps_disc).
    """
    if not (0 < v_min <= v_max):
        raise GridError("speed grid needs 0 < v_min <= v_max")
    if not (eps_disc > 0) or not (alpha > 1):
        raise GridError("speed grid needs eps_disc > 0 and alpha > 1")
    ratio = (1.0 + eps_disc) ** (1.0 / (alpha - 1.0))
    speeds = [v_min]
    while speeds[-1] * ratio < v_max:
        speeds.append(speeds[-1] * ratio)
    if speeds[-1] < v_max:
        speeds.append(v_max)
    return speeds


@dataclass(frozen=True)
class Grids:
    """Discrete speeds and start-time grid."""
    speeds: Tuple[float, ...]
    time_step: float
    horizon: Optional[float] = None
    eps_disc: Optional[float] = None

    def __post_init__(self):
        speeds = tuple(sorted(set(float(v) for v in self.speeds)))
        if not speeds or speeds[0] <= 0:
            raise GridError("speed grid must be a non-empty list of positive speeds")
        if not (self.time_step > 0):
            raise GridError("time_step must be positive")
        object.__setattr__(self, 'speeds', speeds)
        object.__setattr__(self, 'time_step', float(self.time_step))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], alpha: Optional[float] = None) -> 'Grids':
        """
        Build grids from the grid-file schema.

        Either "speeds" is given, or "v_min"/"v_max" together with "eps_disc"
        and an alpha (argument or "alpha" key) for a geometric grid.
        """
        try:
            time_step = data['time_step']
        except KeyError as e:
            raise GridError("grid config needs time_step") from e
        eps_disc = data.get('eps_disc')
        if 'speeds' in data:
            speeds = data['speeds']
        elif 'v_min' in data and 'v_max' in data:
            grid_alpha = data.get('alpha', alpha)
            if eps_disc is None or grid_alpha is None:
                raise GridError("geometric speed grid needs eps_disc and alpha")
            speeds = build_speed_grid(data['v_min'], data['v_max'], eps_disc, grid_alpha)
        else:
            raise GridError("grid config needs speeds or v_min/v_max")
        return cls(speeds=tuple(speeds), time_step=time_step,
                   horizon=data.get('horizon'), eps_disc=eps_disc)

    @classmethod
    def from_file(cls, path: Union[str, Path], alpha: Optional[float] = None) -> 'Grids':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise GridError(f"malformed grid file {path}: {e}") from e
        return cls.from_dict(data, alpha=alpha)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'speeds': list(self.speeds), 'time_step': self.time_step}
        if self.eps_disc is not None:
            data['eps_disc'] = self.eps_disc
        if self.horizon is not None:
            data['horizon'] = self.horizon
        return data

    def start_times(self, release: float, latest: float) -> List[float]:
        """Grid points tau with release <= tau <= latest."""
        k = math.ceil(release / self.time_step)
        if (k - 1) * self.time_step >= release:
            k -= 1
        times = []
        while k * self.time_step <= latest:
            tau = k * self.time_step
            if self.horizon is not None and tau > self.horizon:
                break
            times.append(tau)
            k += 1
        return times

    def check_compatibility(self, instance: Instance) -> Tuple[List[Tuple[int, int, float]], float]:
        """
        Find (job, machine, speed) triples whose duration p/v is off the time grid.

        Returns:
            (offending triples, coarsest time step that fits every duration, release and deadline)
        """
        offending = []
        quantities = []
        for job in instance.jobs:
            quantities.append(job.release)
            if job.deadline is not None:
                quantities.append(job.deadline)
            for machine, p in enumerate(job.proc):
                for v in self.speeds:
                    duration = p / v
                    quantities.append(duration)
                    ratio = duration / self.time_step
                    if abs(ratio - round(ratio)) > 1e-9:
                        offending.append((job.id, machine, v))
        return offending, _coarsest_step(quantities)

    def require_compatible(self, instance: Instance):
        """
        Refuse an instance whose durations p/v do not end on the time grid.

        Raises:
            GridError: Naming the offending triples and the coarsest compatible step
        """
        offending, suggestion = self.check_compatibility(instance)
        if offending:
            shown = ", ".join(f"(job {j}, machine {i}, speed {v:g})" for j, i, v in offending[:5])
            raise GridError(f"{len(offending)} durations are off the time step {self.time_step:g}: "
                            f"{shown}; use time_step={suggestion:g}")


def _coarsest_step(values: Iterable[float]) -> float:
    fractions = [Fraction(v).limit_denominator(10 ** 6) for v in values if v > 0]
    if not fractions:
        return 1.0
    denominator = 1
    for frac in fractions:
        denominator = denominator * frac.denominator // math.gcd(denominator, frac.denominator)
    numerator = 0
    for frac in fractions:
        numerator = math.gcd(numerator, frac.numerator * (denominator // frac.denominator))
    return numerator / denominator


@dataclass(frozen=True)
class Strategy:
    """One way of executing a job: machine, start, constant speed, end."""
    machine: int
    job: int
    start: float
    speed: float
    end: float

    @property
    def order_key(self) -> Tuple[int, float, float]:
        return (self.machine, self.start, self.speed)

    def to_dict(self) -> Dict[str, Any]:
        return {'machine': self.machine, 'job': self.job, 'start': self.start,
                'speed': self.speed, 'end': self.end}


class LoadProfile:
    """Per-machine total speed u_i(t) as exact step functions."""

    def __init__(self, machines: int):
        self.machines = machines
        self._profiles = [PiecewiseConstantFunction(0.0) for _ in range(machines)]

    @classmethod
    def from_strategies(cls, machines: int, strategies: Iterable[Strategy]) -> 'LoadProfile':
        profile = cls(machines)
        for strategy in strategies:
            profile.add(strategy)
        return profile

    def add(self, strategy: Strategy):
        self._profiles[strategy.machine].add_interval(strategy.start, strategy.end, strategy.speed)

    def machine(self, index: int) -> PiecewiseConstantFunction:
        return self._profiles[index]

    def speed_at(self, machine: int, t: float) -> float:
        return self._profiles[machine].call(t)

    def energy(self, machine: int, power: PowerFunction) -> float:
        """f_i: integral of P(u_i(t)) over the support of the profile."""
        profile = self._profiles[machine]
        points = profile.breakpoints
        if not points:
            return 0.0
        return profile.integral(points[0], points[-1], transform=power)


def enumerate_strategies(job: Job, grids: Grids) -> List[Strategy]:
    """
    All grid strategies of a job on every machine.

    Order: machine, start time, speed.

    Raises:
        GridError: If the job has no deadline or no strategy fits its window
    """
    if job.deadline is None:
        raise GridError(f"job {job.id} has no deadline")
    strategies = []
    for machine, p in enumerate(job.proc):
        for tau in grids.start_times(job.release, job.deadline):
            for v in grids.speeds:
                end = tau + p / v
                if end <= job.deadline:
                    strategies.append(Strategy(machine=machine, job=job.id, start=tau, speed=v, end=end))
    if not strategies:
        raise GridError(f"job {job.id}: no feasible strategy in window "
                        f"[{job.release}, {job.deadline}] for the configured grid")
    return strategies


def marginal_energy(strategy: Strategy, load: LoadProfile, power: PowerFunction) -> float:
    """Integral over the strategy's interval of P(u + v) - P(u)."""
    if strategy.speed == 0:
        return 0.0
    total = 0.0
    for left, right, u in load.machine(strategy.machine).pieces(strategy.start, strategy.end):
        total += (right - left) * (power(u + strategy.speed) - power(u))
    return float(total)


def configuration_energy(strategies: Iterable[Strategy], machine: int, power: PowerFunction) -> float:
    """f_i(A) for a set of strategies on one machine."""
    profile = LoadProfile(machine + 1)
    for strategy in strategies:
        if strategy.machine == machine:
            profile.add(strategy)
    return profile.energy(machine, power)


def _smoothness_ratio(power: PowerFunction, a: np.ndarray, b: np.ndarray, mu: float) -> float:
    prefix = np.cumsum(a)
    gain = float(np.sum(power(b + prefix) - power(prefix)))
    return (gain - mu * float(power(prefix[-1]))) / float(power(np.sum(b)))


def smoothness_lambda_estimate(power: PowerFunction, trials: int = 2000, seed: int = 0,
                               mu: float = 0.5, refine_steps: int = 400) -> float:
    """
    Empirical lower estimate of the smallest lambda making P (lambda, mu)-smooth.

    Samples `trials` pairs of sequences a, b (lengths 1..6, values in (0, 2])
    and maximizes
        (sum_i [P(b_i + a_1..a_i) - P(a_1..a_i)] - mu * P(sum a)) / P(sum b),
    then refines the best pair by seeded coordinate hill-climbing.
    """
    if not (0 <= mu < 1):
        raise ParameterError("mu must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    best_value = -math.inf
    best_pair = None
    for _ in range(max(1, trials)):
        length = int(rng.integers(1, 7))
        a = 2.0 - rng.uniform(0.0, 2.0, size=length)
        b = 2.0 - rng.uniform(0.0, 2.0, size=length)
        value = _smoothness_ratio(power, a, b, mu)
        if value > best_value:
            best_value, best_pair = value, (a, b)

    a, b = (arr.copy() for arr in best_pair)
    step = 0.5
    for _ in range(refine_steps):
        improved = False
        for arr in (a, b):
            for idx in range(len(arr)):
                for direction in (1.0, -1.0):
                    old = arr[idx]
                    arr[idx] = min(2.0, max(1e-9, old + direction * step))
                    value = _smoothness_ratio(power, a, b, mu)
                    if value > best_value:
                        best_value = value
                        improved = True
                    else:
                        arr[idx] = old
        if not improved:
            step /= 2.0
            if step < 1e-10:
                break
    logger.debug(f"smoothness estimate for {power!r}, mu={mu}: lambda={best_value:.6g}")
    return float(best_value)


def energy_ratio_bound(lam: float, mu: float) -> float:
    """lambda / (1 - mu)."""
    return lam / (1.0 - mu)


@dataclass
class EnergyDuals:
    """Dual solution built by the greedy run."""
    delta: Dict[int, float]
    beta: Dict[Tuple[int, int, int], float]
    gamma_m: Dict[int, float]
    lambda_mu: Tuple[float, float]
    strategies: Dict[int, List[Strategy]] = field(default_factory=dict)
    assignment: Dict[int, Strategy] = field(default_factory=dict)
    machine_energy: Dict[int, float] = field(default_factory=dict)

    def objective(self) -> float:
        return float(sum(self.delta.values()) + sum(self.gamma_m.values()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lambda': self.lambda_mu[0],
            'mu': self.lambda_mu[1],
            'delta': {str(k): v for k, v in sorted(self.delta.items())},
            'gamma': {str(k): v for k, v in sorted(self.gamma_m.items())},
            'beta': [{'machine': i, 'job': j, 'strategy': k, 'value': v}
                     for (i, j, k), v in sorted(self.beta.items())],
            'assignment': {str(k): s.to_dict() for k, s in sorted(self.assignment.items())},
            'machine_energy': {str(k): v for k, v in sorted(self.machine_energy.items())},
        }


def _power_list(powers, machines: int) -> List[PowerFunction]:
    if isinstance(powers, PowerFunction):
        return [powers] * machines
    powers = list(powers)
    if len(powers) != machines:
        raise ParameterError("one power function per machine is required")
    return powers


class GreedyEnergyScheduler:
    """
    Online greedy assignment that commits a strategy at each release.

    `assign` can be driven job by job (adaptive adversaries do this);
    `finalize` produces the trace and the dual solution.
    """

    def __init__(self, machines: int, grids: Grids,
                 powers: Union[PowerFunction, Sequence[PowerFunction]],
                 lam: float, mu: float):
        if not (lam > 0):
            raise ParameterError("lambda must be positive")
        if not (0 <= mu < 1):
            raise ParameterError("mu must lie in [0, 1)")
        self.machines = machines
        self.grids = grids
        self.powers = _power_list(powers, machines)
        self.lam = lam
        self.mu = mu
        self.load = LoadProfile(machines)
        self.jobs: List[Job] = []
        self.assignment: Dict[int, Strategy] = {}
        self.strategies: Dict[int, List[Strategy]] = {}
        self.beta: Dict[Tuple[int, int, int], float] = {}
        self.delta: Dict[int, float] = {}
        self.logger = logging.getLogger(__name__)

    def assign(self, job: Job) -> Strategy:
        """Commit the least-marginal-energy strategy of an arriving job."""
        if len(job.proc) != self.machines:
            raise ParameterError(f"job {job.id} has {len(job.proc)} volumes for {self.machines} machines")
        strategies = enumerate_strategies(job, self.grids)
        marginals = [marginal_energy(s, self.load, self.powers[s.machine]) for s in strategies]
        best = min(range(len(strategies)), key=lambda k: (marginals[k],) + strategies[k].order_key)

        for k, (strategy, marginal) in enumerate(zip(strategies, marginals)):
            self.beta[(strategy.machine, job.id, k)] = marginal / self.lam
        chosen = strategies[best]
        self.delta[job.id] = marginals[best] / self.lam
        self.strategies[job.id] = strategies
        self.assignment[job.id] = chosen
        self.jobs.append(job)
        self.load.add(chosen)
        self.logger.debug(f"job {job.id}: machine {chosen.machine}, start {chosen.start}, "
                          f"speed {chosen.speed}, marginal {marginals[best]:.6g} "
                          f"({len(strategies)} strategies)")
        return chosen

    def machine_energy(self, machine: int) -> float:
        return self.load.energy(machine, self.powers[machine])

    @property
    def total_energy(self) -> float:
        return float(sum(self.machine_energy(i) for i in range(self.machines)))

    def finalize(self) -> Tuple[ScheduleTrace, EnergyDuals]:
        records = {}
        events = []
        for job in self.jobs:
            s = self.assignment[job.id]
            records[job.id] = ExecutionRecord(job=job.id, machine=s.machine, start=s.start,
                                              speed=s.speed, end=s.end, outcome=Outcome.COMPLETED)
            events.append(TraceEvent(job.release, EventKind.DISPATCH, job.id, s.machine))
            events.append(TraceEvent(s.start, EventKind.START, job.id, s.machine))
            events.append(TraceEvent(s.end, EventKind.COMPLETE, job.id, s.machine))
            events.append(TraceEvent(s.end, EventKind.DEFINITIVE_FINISH, job.id, s.machine))
        events.sort(key=lambda event: event.time)

        energies = {i: self.machine_energy(i) for i in range(self.machines)}
        gamma_m = {i: -(self.mu / self.lam) * energies[i] for i in range(self.machines)}
        trace = ScheduleTrace(
            model=Model.ENERGY_DEADLINE,
            records=records,
            events=events,
            objective=float(sum(energies.values())),
            definitive_finish={job_id: record.end for job_id, record in records.items()},
        )
        duals = EnergyDuals(
            delta=dict(self.delta),
            beta=dict(self.beta),
            gamma_m=gamma_m,
            lambda_mu=(self.lam, self.mu),
            strategies=dict(self.strategies),
            assignment=dict(self.assignment),
            machine_energy=energies,
        )
        return trace, duals


def default_mu(alpha: float) -> float:
    """mu = (alpha - 1) / alpha for P = s^alpha."""
    return (alpha - 1.0) / alpha


def greedy_assign(instance: Instance, grids: Grids,
                  powers: Optional[Union[PowerFunction, Sequence[PowerFunction]]] = None,
                  lam: Optional[float] = None, mu: Optional[float] = None,
                  trials: int = 2000, seed: int = 0) -> Tuple[ScheduleTrace, EnergyDuals]:
    """
    Run the greedy marginal-energy assignment over an energy-deadline instance.

    Defaults: P = s^alpha from the instance, mu = (alpha-1)/alpha, lambda from
    smoothness_lambda_estimate(P, trials, seed, mu).

    Raises:
        ModelMismatchError: If the instance is not an energy-deadline instance
        GridError: If some duration p/v ends off the time grid
    """
    if instance.model != Model.ENERGY_DEADLINE:
        raise ModelMismatchError(
            f"energy engine requires an energy_deadline instance, got {instance.model.value}")
    grids.require_compatible(instance)
    if powers is None:
        if instance.alpha is None:
            raise ParameterError("instance has no alpha and no power function was given")
        powers = PowerFunction.power_law(instance.alpha)
    if mu is None:
        if instance.alpha is None:
            raise ParameterError("mu is required when the instance has no alpha")
        mu = default_mu(instance.alpha)
    if lam is None:
        reference = powers if isinstance(powers, PowerFunction) else list(powers)[0]
        lam = smoothness_lambda_estimate(reference, trials=trials, seed=seed, mu=mu)

    scheduler = GreedyEnergyScheduler(instance.machines, grids, powers, lam, mu)
    for job in instance.jobs:
        scheduler.assign(job)
    trace, duals = scheduler.finalize()
    logger.info(f"Greedy energy run finished: n={instance.n}, energy={trace.objective:.6g}, "
                f"lambda={lam:.6g}, mu={mu:.6g}")
    return trace, duals
