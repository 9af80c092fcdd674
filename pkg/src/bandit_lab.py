"""
Command-line front end for the bandit laboratory

    python src/bandit_lab.py regret --config configs/delta10_regret.json --out regret.csv
    python src/bandit_lab.py coverage --config configs/delta10_coverage.json --workers 4
    python src/bandit_lab.py infogain --config configs/sqexp25_infogain.json
    python src/bandit_lab.py estimate --config configs/sqexp25_estimator.json
    python src/bandit_lab.py summarize --csv regret.csv

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from errors import ConfigError, ConstructionError, MalformedInputError, NumericalError
from experiment_config import COVERAGE, ESTIMATOR, INFOGAIN, REGRET, load_config
from experiments import run_experiment, write_csv
from reporting import banner, print_report, regret_summary_from_records
from results_store import archive_result

logger = logging.getLogger('bandit_lab')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

COMMAND_KINDS = {
    'regret': REGRET,
    'coverage': COVERAGE,
    'infogain': INFOGAIN,
    'estimate': ESTIMATOR,
}


class UsageError(Exception):
    pass


class LabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser():
    common = LabArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='Experiment config (JSON)')
    common.add_argument('--out', help='CSV path for records; overrides "output" in the config')
    common.add_argument('--seed-offset', type=int, default=0, help='Shift every seed by this amount')
    common.add_argument('--workers', type=int, default=None,
                        help='Processes for seed-level parallelism; overrides "workers"')
    common.add_argument('--db', help='SQLAlchemy URL to archive summaries (e.g. sqlite:///runs.db)')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='Only warnings and errors; no report')
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = LabArgumentParser(prog='bandit_lab', description='Kernelized Bernoulli bandit experiments')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    subparsers.add_parser('regret', parents=[common], help='Cumulative regret of each policy')
    subparsers.add_parser('coverage', parents=[common], help='Confidence bound coverage')
    subparsers.add_parser('infogain', parents=[common], help='Information gain sweep')
    subparsers.add_parser('estimate', parents=[common], help='GP vs Beta-field estimator range')

    summarize = subparsers.add_parser('summarize', help='Reprint a regret summary from a CSV')
    summarize.add_argument('--csv', required=True, help='Regret record CSV')
    summarize.add_argument('--quiet', action='store_true', help=argparse.SUPPRESS)
    summarize.add_argument('--verbose', action='store_true', help=argparse.SUPPRESS)
    return parser


def configure_logging(quiet=False, verbose=False):
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s', force=True)


def summary_path(out_path):
    out_path = Path(out_path)
    return out_path.with_name(f"{out_path.stem}_summary.csv")


def run_command(args):
    kind = COMMAND_KINDS[args.command]
    config = load_config(args.config)
    if config.kind != kind:
        raise ConfigError(
            f"Config describes a '{config.kind}' experiment; the '{args.command}' command needs '{kind}'",
            path=args.config)
    if args.seed_offset:
        config = config.with_seed_offset(args.seed_offset)
    out_path = args.out or config.output
    if not out_path:
        raise ConfigError("No output path: pass --out or set 'output' in the config", path=args.config)
    if args.workers is not None and args.workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {args.workers}")

    result = run_experiment(config, workers=args.workers)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_csv(result.frame(), out_path)
    write_csv(result.summary, summary_path(out_path))
    if not args.quiet:
        print_report(config, result, out_path)
    if args.db:
        run_id = archive_result(args.db, config, result)
        logger.info("Archived summaries as run %d in %s", run_id, args.db)


def summarize_command(args):
    try:
        frame = pd.read_csv(args.csv)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Cannot read records: {e}", path=args.csv) from e
    try:
        overview = regret_summary_from_records(frame)
    except ValueError as e:
        raise ConfigError(str(e), path=args.csv) from e
    if not args.quiet:
        print(banner(f"Regret summary: {args.csv}"))
        print(overview.to_string(index=False))
        print()


def cli_main(argv=None):
    """
    Parse arguments, run one command and map failures to exit codes

    Returns:
        0 on success, 1 on configuration or usage errors, 2 on numerical failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_CONFIG
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (None, 0) else EXIT_CONFIG

    configure_logging(args.quiet, args.verbose)
    try:
        if args.command == 'summarize':
            summarize_command(args)
        else:
            run_command(args)
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (ConfigError, ConstructionError, MalformedInputError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("Cannot write output: %s", e)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(cli_main())
