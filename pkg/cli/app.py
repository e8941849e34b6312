"""
Argument parsing, logging setup and exit-code mapping for the ``grda`` command.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from cli.commands import COMMAND_MODULES
from cli.commands.common import EXIT_DIVERGENCE, EXIT_INPUT, EXIT_VERDICT
from config.logging_config import setup_logging
from config.settings import get_settings
from engine.errors import (
    DimensionError,
    GraphConnectivityError,
    InputError,
    TrainingDivergenceError,
    UndefinedPosteriorError,
    VerdictFailure,
)

logger = logging.getLogger(__name__)

VERBOSITY_LEVELS = ("WARNING", "INFO", "DEBUG")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grda",
        description="Graph-relational domain adaptation: data, training, evaluation and theory checks",
    )
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Output directory (default: GRDA_OUT or ./grda_out)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--log-json", action="store_true", help="JSON log lines on stderr")

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


def _log_level(verbose: int, configured: str) -> str:
    if verbose:
        return VERBOSITY_LEVELS[min(verbose, len(VERBOSITY_LEVELS) - 1)]
    return configured


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"error: invalid GRDA_* settings: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.out is None:
        args.out = settings.out_dir
    setup_logging(_log_level(args.verbose, settings.log_level), args.log_json or settings.log_json)

    try:
        return args.handler(args, settings)
    except TrainingDivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except VerdictFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERDICT
    except (InputError, DimensionError, GraphConnectivityError, UndefinedPosteriorError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as e:
        print(f"error: {_validation_message(e)}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def _validation_message(error: ValidationError) -> str:
    """First validation problem as ``key: message``."""
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ())) or "input"
    return f"{location}: {first.get('msg', 'invalid value')}"
