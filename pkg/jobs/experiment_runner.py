"""
Experiment runner.
Runs engines on instances, verifies their duals, computes exact baselines and
assembles the rows of the result tables; batches run on a thread pool.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Any, Dict, List, Optional, Sequence

from analysis.oracle import brute_force_energy_opt, brute_force_flow_opt, dual_lower_bound
from analysis.verify import (
    VerifyReport, verify_energy_config_duals, verify_flow_duals, verify_flow_energy_duals,
)
from model.instance_model import Instance, Model, ScheduleTrace, gen_random
from scheduler.energy_min import Grids, greedy_assign
from scheduler.flow_energy import simulate_flow_energy
from scheduler.flowtime import simulate_flow
from scheduler.rejection import RejectionRules
from utils.errors import InstanceTooLargeError, ModelMismatchError, ParameterError, UnverifiedDualsError
from utils.helpers import get_env_variable, ratio
from utils.logger import log_performance, log_run, log_verification

ENGINE_MODELS = {
    'flow': Model.FLOW,
    'flow_baseline': Model.FLOW,
    'flow_energy': Model.FLOW_ENERGY,
    'energy': Model.ENERGY_DEADLINE,
}

DEFAULT_GRID = {'speeds': [0.5, 1.0, 2.0], 'time_step': 0.5}


@dataclass
class EngineOutcome:
    """One engine run: the engine result plus the quantities the tables need."""
    engine: str
    instance: Instance
    epsilon: Optional[float]
    trace: ScheduleTrace
    result: Any = None
    duals: Any = None
    grids: Optional[Grids] = None
    alg_cost: float = 0.0
    rejected_frac: float = 0.0
    runtime_ms: Optional[float] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    def dual_summary(self) -> Dict[str, Any]:
        if self.engine == 'energy':
            summary = self.duals.to_dict()
            summary['objective'] = self.duals.objective()
            return summary
        return {
            'lambda': {str(k): v for k, v in sorted(self.result.lambdas.items())},
            'dispatch': {str(k): v for k, v in sorted(self.result.dispatch.items())},
            'objective': self.result.dual_objective(),
        }

    def to_document(self) -> Dict[str, Any]:
        """Run document: parameters, instance, trace and dual summary."""
        return {
            'engine': self.engine,
            'parameters': dict(self.parameters),
            'instance': self.instance.to_dict(),
            'trace': self.trace.to_dict(),
            'duals': self.dual_summary(),
            'alg_cost': self.alg_cost,
            'rejected_frac': self.rejected_frac,
        }


def engine_model(engine: str) -> Model:
    try:
        return ENGINE_MODELS[engine]
    except KeyError as e:
        raise ParameterError(f"unknown engine '{engine}', expected one of {sorted(ENGINE_MODELS)}") from e


def load_grids(config: Dict[str, Any], grid_path: Optional[str] = None,
               alpha: Optional[float] = None) -> Grids:
    """Grids from --grid, else from energy.grid in the config, else the built-in default."""
    path = grid_path or config.get('energy', {}).get('grid')
    if path and Path(path).exists():
        return Grids.from_file(path, alpha=alpha)
    if grid_path:
        return Grids.from_file(grid_path, alpha=alpha)
    return Grids.from_dict(DEFAULT_GRID)


def run_engine(engine: str, instance: Instance, epsilon: Optional[float] = None,
               config: Optional[Dict[str, Any]] = None, grids: Optional[Grids] = None,
               seed: int = 0, timing: bool = False) -> EngineOutcome:
    """
    Run one engine on an instance.

    Raises:
        ModelMismatchError: If the instance model does not fit the engine
    """
    config = config or {}
    model = engine_model(engine)
    if instance.model != model:
        raise ModelMismatchError(f"engine '{engine}' needs a {model.value} instance, "
                                 f"got {instance.model.value}")
    parameters: Dict[str, Any] = {'epsilon': epsilon, 'seed': seed}
    started = time.perf_counter()

    if engine in ('flow', 'flow_baseline'):
        rules = RejectionRules.disabled() if engine == 'flow_baseline' else RejectionRules.from_config(config)
        result = simulate_flow(instance, epsilon, rules)
        parameters['rules'] = rules.label
        outcome = EngineOutcome(engine, instance, epsilon, result.trace, result=result,
                                alg_cost=result.total_flow, rejected_frac=result.rejected_fraction)
    elif engine == 'flow_energy':
        result = simulate_flow_energy(instance, epsilon)
        parameters['alpha'] = instance.alpha
        outcome = EngineOutcome(engine, instance, epsilon, result.trace, result=result,
                                alg_cost=result.objective,
                                rejected_frac=result.rejected_weight_fraction)
    else:
        grids = grids or load_grids(config, alpha=instance.alpha)
        trials = config.get('experiment', {}).get('smoothness_trials', 2000)
        trace, duals = greedy_assign(instance, grids, trials=trials, seed=seed)
        parameters.update({'alpha': instance.alpha, 'grid': grids.to_dict(), 'smoothness_trials': trials})
        outcome = EngineOutcome(engine, instance, None, trace, duals=duals, grids=grids,
                                alg_cost=trace.objective, rejected_frac=0.0)

    if timing:
        outcome.runtime_ms = (time.perf_counter() - started) * 1000.0
    outcome.parameters = parameters
    log_run({'engine': engine, 'n': instance.n, 'm': instance.machines, 'alg_cost': outcome.alg_cost,
             'rejected_frac': outcome.rejected_frac, **parameters})
    return outcome


def flow_scope(config: Optional[Dict[str, Any]] = None, scope: Optional[str] = None) -> str:
    """Flow dual-check scope: the explicit one, else experiment.scope, else all."""
    return scope or (config or {}).get('experiment', {}).get('scope', 'all')


def verify_outcome(outcome: EngineOutcome, config: Optional[Dict[str, Any]] = None,
                   scope: Optional[str] = None) -> VerifyReport:
    """Run the dual checker matching the engine of an outcome."""
    experiment = (config or {}).get('experiment', {})
    if outcome.engine in ('flow', 'flow_baseline'):
        report = verify_flow_duals(outcome.result, outcome.epsilon, scope=flow_scope(config, scope))
    elif outcome.engine == 'flow_energy':
        report = verify_flow_energy_duals(outcome.result,
                                          grid_points=experiment.get('grid_points', 8))
    else:
        report = verify_energy_config_duals(outcome.duals, outcome.instance, outcome.grids,
                                            max_configs=experiment.get('max_configs', 10000),
                                            seed=outcome.parameters.get('seed', 0))
    log_verification(f"{outcome.engine} n={outcome.instance.n}", report.to_dict())
    return report


def exact_opt(outcome: EngineOutcome, config: Optional[Dict[str, Any]] = None,
              max_brute: Optional[int] = None) -> Optional[float]:
    """Brute-force optimum when the instance is small enough, else None."""
    experiment = (config or {}).get('experiment', {})
    try:
        if outcome.engine in ('flow', 'flow_baseline'):
            cap = max_brute if max_brute is not None else experiment.get('max_brute', 8)
            return brute_force_flow_opt(outcome.instance, cap=cap)
        if outcome.engine == 'energy':
            cap = max_brute if max_brute is not None else experiment.get('energy_cap', 100000)
            return brute_force_energy_opt(outcome.instance, outcome.grids, cap=cap)
    except InstanceTooLargeError as e:
        logging.getLogger(__name__).debug(f"no exact optimum: {e}")
    return None


def _nullable(value: Optional[float]) -> Optional[float]:
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


class ExperimentRunner:
    """
    Evaluates (instance, engine, parameters) tasks and assembles result rows.

    Rows are returned sorted by instance_id regardless of completion order.
    """

    def __init__(self, config: Dict[str, Any], threads: Optional[int] = None,
                 timing: bool = False, scope: Optional[str] = None,
                 max_brute: Optional[int] = None):
        """
        Initialize experiment runner.

        Args:
            config: System configuration
            threads: Worker count; REJECTSCHED_THREADS caps it
            timing: Fill the runtime_ms column
            scope: Flow dual-check scope
            max_brute: Override of the brute-force cap
        """
        self.config = config
        self.timing = timing
        self.scope = scope
        self.max_brute = max_brute
        env_cap = get_env_variable('REJECTSCHED_THREADS')
        configured = threads or (int(env_cap) if env_cap else config.get('sweep', {}).get('threads', 4))
        if env_cap:
            configured = min(configured, int(env_cap))
        self.threads = max(1, int(configured))
        self.violations = 0
        self._lock = Lock()
        self.logger = logging.getLogger(__name__)

    def evaluate(self, instance_id: str, engine: str, instance: Instance,
                 epsilon: Optional[float] = None, grids: Optional[Grids] = None,
                 seed: int = 0) -> Dict[str, Any]:
        """Run, verify and compare one task; returns one result row."""
        outcome = run_engine(engine, instance, epsilon, self.config, grids=grids,
                             seed=seed, timing=self.timing)
        report = verify_outcome(outcome, self.config, scope=self.scope)
        if not report.certified:
            with self._lock:
                self.violations += 1
            self.logger.warning(f"{instance_id}: {len(report.violations)} dual violations")

        try:
            if engine == 'energy':
                if not report.certified:
                    raise UnverifiedDualsError("configuration duals violated")
                dual_lb = outcome.duals.objective()
            else:
                dual_lb = dual_lower_bound(outcome.result, report=report)
        except UnverifiedDualsError:
            dual_lb = None
        opt = exact_opt(outcome, self.config, self.max_brute)

        return {
            'instance_id': instance_id,
            'engine': engine,
            'eps': epsilon,
            'alpha': instance.alpha,
            'n': instance.n,
            'm': instance.machines,
            'alg_cost': outcome.alg_cost,
            'dual_lb': dual_lb,
            'opt': opt,
            'ratio_vs_opt': _nullable(ratio(outcome.alg_cost, opt)) if opt is not None else None,
            'ratio_vs_duallb': _nullable(ratio(outcome.alg_cost, dual_lb)) if dual_lb is not None else None,
            'rejected_frac': outcome.rejected_frac,
            'runtime_ms': outcome.runtime_ms,
        }

    def run_batch(self, tasks: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """
        Evaluate tasks on the worker pool.

        Each task is a dict of evaluate() keyword arguments. A failing task is
        logged and re-raised after the pool drains.
        """
        started = time.perf_counter()
        rows: List[Dict[str, Any]] = []
        failures = []
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            futures = {executor.submit(self.evaluate, **task): task['instance_id'] for task in tasks}
            for future in as_completed(futures):
                try:
                    rows.append(future.result())
                except Exception as e:
                    self.logger.error(f"Task {futures[future]} failed: {str(e)}")
                    failures.append(e)
        if failures:
            raise failures[0]

        rows.sort(key=lambda row: row['instance_id'])
        log_performance({'instances': len(rows), 'threads': self.threads,
                         'processing_time': time.perf_counter() - started,
                         'violations': self.violations})
        return rows


def sweep_tasks(engine: str, config: Dict[str, Any], eps_values: Sequence[float],
                alpha_values: Sequence[float], count: int, seed: int, n: int, m: int,
                grids: Optional[Grids] = None) -> List[Dict[str, Any]]:
    """Seeded instances for every (eps, alpha) grid point; ids sort in generation order."""
    model = engine_model(engine)
    experiment = config.get('experiment', {})
    generator = config.get('generator', {})
    tasks = []
    alphas = list(alpha_values) if model != Model.FLOW else [None]
    epsilons = list(eps_values) if engine != 'energy' else [None]
    index = 0
    for alpha in alphas:
        for epsilon in epsilons:
            for k in range(count):
                instance = gen_random(
                    seed + k, n, m,
                    p_range=tuple(experiment.get('p_range', (1.0, 10.0))),
                    w_range=tuple(experiment.get('w_range', (1.0, 1.0))),
                    horizon=experiment.get('horizon', 20.0),
                    model=model,
                    alpha=alpha,
                    time_step=generator.get('time_step') if model == Model.ENERGY_DEADLINE else None,
                    deadline_slack=tuple(generator.get('deadline_slack', (1.0, 3.0))),
                )
                tasks.append({
                    'instance_id': f"{index:05d}_{engine}_s{seed + k}",
                    'engine': engine,
                    'instance': instance,
                    'epsilon': epsilon,
                    'grids': grids,
                    'seed': seed + k,
                })
                index += 1
    return tasks
