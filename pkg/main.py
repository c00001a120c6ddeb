# relevation-lab/main.py (single entry point for every subcommand)

import os
from dotenv import load_dotenv

# Prefer .env.local if present (local overrides), otherwise fall back to default .env
if os.path.exists('.env.local'):
    load_dotenv('.env.local')
else:
    load_dotenv()

import argparse
import logging
import sys
import traceback

from pydantic import ValidationError

from relevation_lab.commands import ageing as ageing_command
from relevation_lab.commands import compare as compare_command
from relevation_lab.commands import figure as figure_command
from relevation_lab.commands import relevation_curve as relevation_curve_command
from relevation_lab.commands import simulate as simulate_command
from relevation_lab.errors import RelevationError

logger = logging.getLogger("relevation_lab")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relevation-lab",
        description="Relevation vs replacement-by-new: simulation, quadrature and stochastic-order checks",
    )
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    # -----------------------------------------------------------------
    # Subcommand registration (each module owns one command name)
    # -----------------------------------------------------------------
    subparsers = parser.add_subparsers(dest="command", required=True)
    simulate_command.register(subparsers)
    compare_command.register(subparsers)
    figure_command.register(subparsers)
    ageing_command.register(subparsers)
    relevation_curve_command.register(subparsers)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse reports usage errors itself
        return EXIT_CONFIG if e.code else EXIT_OK

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args)
    except RelevationError as e:
        logger.error("[main] %s: %s", type(e).__name__, e.detail)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "config"
        logger.error("[main] invalid configuration at %s: %s", where, first["msg"])
        print(f"error: invalid {where}: {first['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        logger.error("[main] unexpected failure:\n%s", traceback.format_exc())
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
