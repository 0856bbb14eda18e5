import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence

from dotenv import load_dotenv

from . import __version__
from .commands import setup_commands
from .errors import InvalidParameter

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise InvalidParameter(f"{name} must be an integer, got '{raw}'", field=name)


def env_defaults() -> Dict[str, Any]:
    return {
        "seed": _env_int("WBVP_SEED", 0),
        "threads": _env_int("WBVP_THREADS", 1),
        "eigensolver": os.getenv("WBVP_EIGENSOLVER", "jacobi"),
        "log_level": os.getenv("WBVP_LOG_LEVEL", "WARNING").upper(),
    }


def build_parser(env: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    env = env or env_defaults()
    parser = argparse.ArgumentParser(
        prog="weighted-bvp",
        description="Weighted discrete elliptic boundary value problems on a rectangular grid",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    setup_commands(subparsers, env)
    return parser


def configure_logging(verbosity: int, level_name: str = "WARNING") -> None:
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.WARNING
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = min(level, logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("weighted_bvp").setLevel(level)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return its exit code."""
    try:
        env = env_defaults()
    except InvalidParameter as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    parser = build_parser(env)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors are input errors; --help and --version exit 0
        return 0 if e.code in (0, None) else 1
    configure_logging(args.verbose, env["log_level"])
    logger.debug(f"Running {args.command} with {vars(args)}")
    return args.handler(args)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
