"""Command-line entry point: ``randcontract <command> [options]``.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when a numerical
routine fails (diagnostics go to stderr).
"""

import argparse
import logging
import sys

from .exceptions import ContractionError, NumericalFailureError
from .experiments import COMMANDS, ExperimentSpec, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    parser = argparse.ArgumentParser(prog="randcontract", description="Random contraction experiments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--n", type=int, default=300, help="matrix dimension N")
    parser.add_argument("--delta-n", type=int, default=1, help="truncation depth")
    length = parser.add_mutually_exclusive_group()
    length.add_argument("--tau", type=float, nargs="+", help="scaling parameter; entropy accepts several")
    length.add_argument("--chain-length", type=int, help="number of truncated factors L")
    parser.add_argument("--group", choices=("unitary", "orthogonal"), default="unitary")
    parser.add_argument("--realizations", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--p-max", type=int, default=20)
    parser.add_argument("--alpha", type=float, help="Renyi index for the analytic command")
    parser.add_argument("--bins", type=int, default=60)
    parser.add_argument("--lambda-max", type=float)
    parser.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--quiet", action="store_true", help="suppress progress on stderr")
    return parser


def _configure_logging(quiet):
    logger = logging.getLogger("randcontract")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.WARNING if quiet else logging.INFO)
    logger.propagate = False


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    quiet = args.pop("quiet")
    _configure_logging(quiet)
    try:
        spec = ExperimentSpec(**args)
        report = run(spec)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for key, value in sorted(exc.diagnostics.items()):
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ContractionError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.render(spec.output_format)
    if spec.out:
        try:
            with open(spec.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {spec.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK
