"""Command-line entry point.

Exit codes: 0 on success, 1 on a parse or validation error, 2 on a runtime error.
"""

import argparse
import sys

from ..errors import ParseError, ValidationError
from .config import load_config
from .experiment import dump_operators, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rkhs-fusion",
        description="Two-agent kernel regression with forget-and-relearn fusion.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write its outputs")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_dump = sub.add_parser("dump-operators", help="print the fixed operators of a config")
    p_dump.add_argument("config")
    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (ParseError, ValidationError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        if args.command == "validate":
            print(f"{args.config}: ok")
        elif args.command == "dump-operators":
            sys.stdout.write(dump_operators(config))
        else:
            run_experiment(config, args.out, args.seed)
    except Exception as exc:  # noqa: BLE001 -- any failure maps to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
