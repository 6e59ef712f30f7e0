"""
Command handlers for the command-line interface.
Each handler takes the parsed arguments and the loaded config and returns an exit
code: 0 on success, 1 when verification finds violations, 2 on usage or input errors.
"""

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from analysis.adversary import lb1_adversary, lb2_adversary
from analysis.oracle import flow_ratio_bound
from database.result_store import ADVERSARY_COLUMNS, RESULT_COLUMNS, ResultStore
from jobs.experiment_runner import (
    EngineOutcome, ExperimentRunner, flow_scope, load_grids, run_engine, sweep_tasks, verify_outcome,
)
from model.instance_model import Instance, Model, ScheduleTrace, gen_random, parse_instance
from scheduler.energy_min import Grids
from scheduler.flow_energy import flow_energy_ratio_bound
from scheduler.flowtime import simulate_flow
from scheduler.rejection import RejectionRules
from utils.errors import ParameterError, RejectSchedError
from utils.helpers import parse_float_list

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2

RULE_LABELS = {
    'rules12': RejectionRules(True, True),
    'rule1': RejectionRules(True, False),
    'rule2': RejectionRules(False, True),
    'norej': RejectionRules.disabled(),
}


def _value(args, name: str, config: Dict[str, Any], default: Any) -> Any:
    """CLI flag if given, else experiment.<name> from the config, else default."""
    value = getattr(args, name, None)
    return value if value is not None else config.get('experiment', {}).get(name, default)


def _float_list(args, name: str, config: Dict[str, Any], section: str, default: List[float]) -> List[float]:
    value = getattr(args, name, None)
    if value is not None:
        return parse_float_list(value)
    configured = config.get(section, {}).get(name, default)
    return [float(v) for v in configured] if isinstance(configured, list) else parse_float_list(str(configured))


def _epsilon(args, config: Dict[str, Any]) -> float:
    return parse_float_list(str(_value(args, 'eps', config, 0.5)))[0]


def guarded(handler):
    """Turn simulator, value and file errors into exit code 2."""
    def wrapper(args, config: Dict[str, Any]) -> int:
        try:
            return handler(args, config)
        except (RejectSchedError, ValueError, OSError) as e:
            logger.error(f"{handler.__name__} failed: {str(e)}")
            print(f"❌ {e}")
            return EXIT_USAGE
    wrapper.__name__ = handler.__name__
    wrapper.__doc__ = handler.__doc__
    return wrapper


@guarded
def cmd_generate(args, config: Dict[str, Any]) -> int:
    """Generate seeded random instances."""
    model = Model(args.model)
    experiment = config.get('experiment', {})
    generator = config.get('generator', {})
    seed = _value(args, 'seed', config, 0)
    alpha = args.alpha if args.alpha is not None else experiment.get('alpha', 2.0)
    store = ResultStore(config)

    count = args.count or 1
    for k in range(count):
        instance = gen_random(
            seed + k,
            _value(args, 'n', config, 8),
            _value(args, 'm', config, 2),
            p_range=tuple(experiment.get('p_range', (1.0, 10.0))),
            w_range=tuple(experiment.get('w_range', (1.0, 1.0))),
            horizon=experiment.get('horizon', 20.0),
            model=model,
            alpha=None if model == Model.FLOW else alpha,
            time_step=generator.get('time_step') if model == Model.ENERGY_DEADLINE else None,
            deadline_slack=tuple(generator.get('deadline_slack', (1.0, 3.0))),
        )
        if count == 1 and args.out and args.out.endswith('.json'):
            target = args.out
        else:
            target = str(Path(args.out or 'instances') / f"instance_{model.value}_s{seed + k}.json")
        path = store.save_instance(instance, target)
        print(f"✅ {path} ({instance.n} jobs, {instance.machines} machines)")
    return EXIT_OK


def _load_instance(args, config: Dict[str, Any]) -> Instance:
    instance = ResultStore(config).load_instance(args.instance)
    if getattr(args, 'alpha', None) is not None and instance.model != Model.FLOW:
        instance = replace(instance, alpha=args.alpha)
    return instance


def _grids_for(args, config: Dict[str, Any], instance: Instance):
    if instance.model != Model.ENERGY_DEADLINE:
        return None
    return load_grids(config, getattr(args, 'grid', None), alpha=instance.alpha)


@guarded
def cmd_run(args, config: Dict[str, Any]) -> int:
    """Run an engine on an instance and write the run document."""
    instance = _load_instance(args, config)
    outcome = run_engine(args.engine, instance, _epsilon(args, config), config,
                         grids=_grids_for(args, config, instance),
                         seed=_value(args, 'seed', config, 0))

    store = ResultStore(config)
    path = store.save_run(outcome.to_document(), args.out or f"run_{args.engine}.json")
    if args.trace_csv:
        store.save_trace_csv(outcome.trace, args.trace_csv)
    print(f"✅ {args.engine}: cost={outcome.alg_cost:.6g}, "
          f"rejected={outcome.rejected_frac:.3f} -> {path}")
    return EXIT_OK


def rerun(run: Dict[str, Any], config: Dict[str, Any]) -> EngineOutcome:
    """Re-simulate a stored run; every engine is deterministic in its parameters."""
    instance = parse_instance(json.dumps(run['instance']))
    engine = run['engine']
    parameters = run.get('parameters', {})
    grids = Grids.from_dict(parameters['grid']) if 'grid' in parameters else None
    if engine == 'flow' and parameters.get('rules') in RULE_LABELS:
        rules = RULE_LABELS[parameters['rules']]
        config = dict(config, rejection={'rule1': rules.rule1, 'rule2': rules.rule2})
    if engine == 'energy' and 'smoothness_trials' in parameters:
        experiment = dict(config.get('experiment', {}), smoothness_trials=parameters['smoothness_trials'])
        config = dict(config, experiment=experiment)
    return run_engine(engine, instance, parameters.get('epsilon'), config, grids=grids,
                      seed=parameters.get('seed', 0))


@guarded
def cmd_verify(args, config: Dict[str, Any]) -> int:
    """Re-simulate a stored run, check that it reproduces the trace, and verify its duals."""
    store = ResultStore(config)
    run = store.load_run(args.run)
    outcome = rerun(run, config)
    if ScheduleTrace.from_dict(run['trace']).to_dict() != outcome.trace.to_dict():
        print("❌ stored trace does not match a re-run of its engine")
        return EXIT_USAGE

    report = verify_outcome(outcome, config, scope=args.scope)
    if args.out:
        store.save_document(report.to_dict(), args.out)
    scope = _scope_note(outcome, config, args.scope)
    if report.certified:
        print(f"✅ certified{scope}: {report.checked_count} constraints, min slack {report.min_slack:.6g}")
        return EXIT_OK
    print(f"❌ {len(report.violations)} violations out of {report.checked_count} constraints{scope}")
    for violation in report.violations[:10]:
        print(f"   {violation.constraint} machine={violation.machine} job={violation.job} "
              f"t={violation.time} lhs={violation.lhs:.6g} rhs={violation.rhs:.6g}")
    return EXIT_VIOLATIONS


def _scope_note(outcome: EngineOutcome, config: Dict[str, Any], scope: Optional[str]) -> str:
    """Names the flow dual-check scope when other machines could be checked."""
    if outcome.engine not in ('flow', 'flow_baseline') or outcome.instance.machines < 2:
        return ''
    return f" (scope={flow_scope(config, scope)})"


def _runner(args, config: Dict[str, Any]) -> ExperimentRunner:
    return ExperimentRunner(config, timing=getattr(args, 'timing', False),
                            scope=getattr(args, 'scope', None),
                            max_brute=getattr(args, 'max_brute', None))


@guarded
def cmd_ratio(args, config: Dict[str, Any]) -> int:
    """Cost, dual lower bound, exact optimum and ratios for one instance as a CSV row."""
    instance = _load_instance(args, config)
    runner = _runner(args, config)
    epsilon = None if args.engine == 'energy' else _epsilon(args, config)
    row = runner.evaluate(Path(args.instance).stem, args.engine, instance, epsilon,
                          grids=_grids_for(args, config, instance),
                          seed=_value(args, 'seed', config, 0))
    path = ResultStore(config).save_table([row], args.out or 'ratio.csv', columns=RESULT_COLUMNS)

    bound = None
    if args.engine == 'flow':
        bound = flow_ratio_bound(epsilon)
    elif args.engine == 'flow_energy':
        bound = flow_energy_ratio_bound(epsilon, instance.alpha)
    scope = f" scope={flow_scope(config, args.scope)}" if args.engine in ('flow', 'flow_baseline') \
        and instance.machines > 1 else ''
    print(f"✅ alg={row['alg_cost']:.6g} dual_lb={row['dual_lb']} opt={row['opt']} "
          f"ratio_vs_opt={row['ratio_vs_opt']} certificate={bound}{scope} -> {path}")
    return EXIT_VIOLATIONS if runner.violations else EXIT_OK


def _adversary_rows(args, config: Dict[str, Any], adversary: str) -> List[Dict[str, Any]]:
    rows = []
    if adversary == 'lb1':
        engine_name = args.engine if args.engine in ('flow', 'flow_baseline') else 'flow'
        for epsilon in _float_list(args, 'eps', config, 'sweep', [1.0]):
            rules = RejectionRules.disabled() if engine_name == 'flow_baseline' else RejectionRules()
            engine = lambda instance, e=epsilon, r=rules: simulate_flow(instance, e, r)  # noqa: E731
            for L in _float_list(args, 'L', config, 'sweep', [4.0, 16.0, 64.0]):
                transcript = lb1_adversary(epsilon, L, engine=engine)
                rows.append({'adversary': 'lb1', 'engine': engine_name, 'eps': epsilon, 'alpha': None,
                             'L': L, 'jobs': len(transcript.jobs),
                             'alg_cost': transcript.algorithm_cost,
                             'adversary_cost': transcript.adversary_cost, 'ratio': transcript.ratio})
    elif adversary == 'lb2':
        for alpha in _float_list(args, 'alpha', config, 'sweep', [2.0, 3.0]):
            transcript = lb2_adversary(int(alpha))
            rows.append({'adversary': 'lb2', 'engine': 'energy', 'eps': None, 'alpha': alpha,
                         'L': None, 'jobs': len(transcript.jobs),
                         'alg_cost': transcript.algorithm_cost,
                         'adversary_cost': transcript.adversary_cost, 'ratio': transcript.ratio})
    else:
        raise ParameterError(f"unknown adversary '{adversary}'")
    return rows


@guarded
def cmd_sweep(args, config: Dict[str, Any]) -> int:
    """Result table over eps/alpha grids, or over L/alpha for an adversary."""
    store = ResultStore(config)
    if args.adversary:
        rows = _adversary_rows(args, config, args.adversary)
        path = store.save_table(rows, args.out or f"sweep_{args.adversary}.csv", columns=ADVERSARY_COLUMNS)
        print(f"✅ {len(rows)} adversary rows -> {path}")
        return EXIT_OK

    sweep = config.get('sweep', {})
    runner = _runner(args, config)
    grids = load_grids(config, args.grid) if args.engine == 'energy' else None
    tasks = sweep_tasks(
        args.engine, config,
        eps_values=_float_list(args, 'eps', config, 'sweep', [1.0, 0.5]),
        alpha_values=_float_list(args, 'alpha', config, 'sweep', [2.0, 3.0]),
        count=args.instances or sweep.get('instances', 20),
        seed=_value(args, 'seed', config, 0),
        n=_value(args, 'n', config, 8),
        m=_value(args, 'm', config, 2),
        grids=grids,
    )
    rows = runner.run_batch(tasks)
    path = store.save_table(rows, args.out or f"sweep_{args.engine}.csv", columns=RESULT_COLUMNS)
    print(f"✅ {len(rows)} rows on {runner.threads} threads -> {path}")
    if runner.violations:
        print(f"❌ {runner.violations} instances with dual violations")
        return EXIT_VIOLATIONS
    return EXIT_OK


@guarded
def cmd_adversary(args, config: Dict[str, Any]) -> int:
    """Run one adversary and write its transcript."""
    if args.adversary == 'lb1':
        epsilon = _epsilon(args, config)
        rules = RejectionRules.disabled() if args.engine == 'flow_baseline' else RejectionRules()
        L = parse_float_list(args.L)[0] if args.L else 4.0
        transcript = lb1_adversary(epsilon, L, engine=lambda instance: simulate_flow(instance, epsilon, rules))
    elif args.adversary == 'lb2':
        alpha = parse_float_list(str(args.alpha))[0] if args.alpha is not None else 2.0
        transcript = lb2_adversary(int(alpha))
    else:
        raise ParameterError(f"unknown adversary '{args.adversary}'")

    path = ResultStore(config).save_document(transcript.to_dict(), args.out or f"{args.adversary}.json")
    status = "✅" if transcript.feasible else "❌"
    print(f"{status} {args.adversary}: {len(transcript.jobs)} jobs, alg={transcript.algorithm_cost:.6g}, "
          f"adversary={transcript.adversary_cost:.6g}, ratio={transcript.ratio:.6g} -> {path}")
    return EXIT_OK if transcript.feasible else EXIT_VIOLATIONS
