"""
Main entry point for the rejection scheduling simulator.
Provides a command-line interface to generate instances, run engines, verify
dual certificates, compute ratios, sweep parameters and run adversaries.
"""

import sys
import argparse
import logging
from pathlib import Path
from dotenv import load_dotenv

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Load environment variables from .env file
load_dotenv()

from jobs.commands import (  # noqa: E402
    cmd_adversary, cmd_generate, cmd_ratio, cmd_run, cmd_sweep, cmd_verify, EXIT_USAGE,
)
from jobs.experiment_runner import ENGINE_MODELS  # noqa: E402
from model.instance_model import Model  # noqa: E402
from utils.helpers import load_config, setup_logging  # noqa: E402
from utils.logger import initialize_global_logger  # noqa: E402

COMMANDS = {
    'generate': cmd_generate,
    'run': cmd_run,
    'verify': cmd_verify,
    'ratio': cmd_ratio,
    'sweep': cmd_sweep,
    'adversary': cmd_adversary,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        description='Online non-preemptive scheduling with rejection: engines, dual certificates and baselines',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py generate --model flow --n 6 --m 1 --seed 3 --out inst.json
  python main.py run --instance inst.json --engine flow --eps 0.5 --out run.json
  python main.py verify --run run.json
  python main.py ratio --instance inst.json --engine flow --eps 0.5 --max-brute 8
  python main.py sweep --engine flow --eps 1,0.5 --instances 50 --out flow.csv
  python main.py sweep --adversary lb1 --engine flow_baseline --L 4,16,64
  python main.py adversary --adversary lb2 --alpha 3 --out lb2.json
        """
    )

    # Global arguments
    parser.add_argument('--config', default='config/config.yaml',
                        help='Configuration file path')
    parser.add_argument('--log-level', default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Log level (overrides the config)')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')
    engines = sorted(ENGINE_MODELS)

    generate_parser = subparsers.add_parser('generate', help='Generate seeded random instances')
    generate_parser.add_argument('--model', default=Model.FLOW.value, choices=[m.value for m in Model])
    generate_parser.add_argument('--n', type=int, help='Jobs per instance')
    generate_parser.add_argument('--m', type=int, help='Machines')
    generate_parser.add_argument('--alpha', type=float, help='Power exponent for speed-scaling models')
    generate_parser.add_argument('--seed', type=int, help='First seed')
    generate_parser.add_argument('--count', type=int, default=1, help='Number of instances')
    generate_parser.add_argument('--out', help='Output file (single instance) or directory')

    run_parser = subparsers.add_parser('run', help='Run an engine and write trace and duals')
    run_parser.add_argument('--instance', required=True, help='Instance JSON file')
    run_parser.add_argument('--engine', required=True, choices=engines)
    run_parser.add_argument('--eps', help='Rejection parameter')
    run_parser.add_argument('--alpha', type=float, help='Override the instance alpha')
    run_parser.add_argument('--grid', help='Grid JSON file for the energy engine')
    run_parser.add_argument('--seed', type=int, help='Seed for the smoothness estimate')
    run_parser.add_argument('--out', help='Run document path')
    run_parser.add_argument('--trace-csv', dest='trace_csv', help='Also export the trace as CSV')

    verify_parser = subparsers.add_parser('verify', help='Verify the dual certificate of a run')
    verify_parser.add_argument('--run', required=True, help='Run document written by "run"')
    verify_parser.add_argument('--scope', choices=['all', 'dispatched'],
                               help='Flow dual-check scope')
    verify_parser.add_argument('--out', help='Report JSON path')

    ratio_parser = subparsers.add_parser('ratio', help='Costs, bounds and ratios for one instance')
    ratio_parser.add_argument('--instance', required=True, help='Instance JSON file')
    ratio_parser.add_argument('--engine', required=True, choices=engines)
    ratio_parser.add_argument('--eps', help='Rejection parameter')
    ratio_parser.add_argument('--alpha', type=float, help='Override the instance alpha')
    ratio_parser.add_argument('--grid', help='Grid JSON file for the energy engine')
    ratio_parser.add_argument('--seed', type=int)
    ratio_parser.add_argument('--max-brute', dest='max_brute', type=int,
                              help='Brute-force cap (jobs for flow, strategy combinations for energy)')
    ratio_parser.add_argument('--scope', choices=['all', 'dispatched'])
    ratio_parser.add_argument('--timing', action='store_true', help='Fill the runtime_ms column')
    ratio_parser.add_argument('--out', help='CSV path')

    sweep_parser = subparsers.add_parser('sweep', help='Result table over parameter grids')
    sweep_parser.add_argument('--engine', default='flow', choices=engines)
    sweep_parser.add_argument('--adversary', choices=['lb1', 'lb2'], help='Sweep an adversary instead')
    sweep_parser.add_argument('--eps', help='Comma separated eps values')
    sweep_parser.add_argument('--alpha', help='Comma separated alpha values')
    sweep_parser.add_argument('--L', help='Comma separated long-job lengths (lb1)')
    sweep_parser.add_argument('--n', type=int)
    sweep_parser.add_argument('--m', type=int)
    sweep_parser.add_argument('--instances', type=int, help='Instances per grid point')
    sweep_parser.add_argument('--seed', type=int)
    sweep_parser.add_argument('--grid', help='Grid JSON file for the energy engine')
    sweep_parser.add_argument('--max-brute', dest='max_brute', type=int)
    sweep_parser.add_argument('--scope', choices=['all', 'dispatched'])
    sweep_parser.add_argument('--timing', action='store_true')
    sweep_parser.add_argument('--out', help='CSV path')

    adversary_parser = subparsers.add_parser('adversary', help='Run a lower-bound adversary')
    adversary_parser.add_argument('--adversary', required=True, choices=['lb1', 'lb2'])
    adversary_parser.add_argument('--engine', default='flow', choices=['flow', 'flow_baseline'],
                                  help='Engine attacked by lb1')
    adversary_parser.add_argument('--eps', help='Rejection parameter (lb1)')
    adversary_parser.add_argument('--L', help='Long-job length (lb1)')
    adversary_parser.add_argument('--alpha', help='Integer alpha (lb2)')
    adversary_parser.add_argument('--out', help='Transcript JSON path')

    return parser


def main(argv=None) -> int:
    """Main entry point with argument parsing."""
    parser = build_parser()
    args = parser.parse_args(argv)

    config = load_config(args.config)
    setup_logging(config, level=args.log_level)
    initialize_global_logger(config)

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_USAGE

    logging.getLogger('rejectsched').debug(f"command={args.command} config={args.config}")
    return handler(args, config)


if __name__ == '__main__':
    exit_code = main()
    sys.exit(exit_code)
