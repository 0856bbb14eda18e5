import argparse
from typing import Any, Mapping

from .handlers.matrix import assemble, spectrum
from .handlers.regimes import check_hypotheses, thresholds
from .handlers.solve import CLI_METHODS, solve, sweep
from .handlers.verify import verify
from .services.regimes import HYPOTHESES, HYPOTHESIS_ALIASES
from .services.spectral import EIGENSOLVERS


def _common(parser: argparse.ArgumentParser, env: Mapping[str, Any]) -> None:
    parser.add_argument("--problem", required=True, help="Problem file (JSON)")
    parser.add_argument("--out", help="Write the report here instead of stdout")
    parser.add_argument(
        "--eigensolver",
        choices=EIGENSOLVERS,
        default=env["eigensolver"],
        help="Symmetric eigensolver (default: %(default)s)",
    )


def _seed(parser: argparse.ArgumentParser, env: Mapping[str, Any]) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=env["seed"],
        help="Seed for random starts (default: %(default)s)",
    )


def _alpha(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="Ball radius of the sublevel mechanism")


def _solver_flags(parser: argparse.ArgumentParser, env: Mapping[str, Any]) -> None:
    parser.add_argument(
        "--method", choices=list(CLI_METHODS), default="global", help="Solution strategy"
    )
    _alpha(parser)
    _seed(parser, env)
    parser.add_argument("--start-value", type=float, help="Constant starting field")
    parser.add_argument("--trace", action="store_true", help="Record the iteration trace")

    options = parser.add_argument_group("solver options")
    options.add_argument("--grad-tol", type=float, default=1e-10)
    options.add_argument("--max-iters", type=int, default=100_000)
    options.add_argument("--armijo-c", type=float, default=1e-4)
    options.add_argument("--backtrack-ratio", type=float, default=0.5)
    options.add_argument("--initial-step", type=float, default=1.0)
    options.add_argument("--nontrivial-tol", type=float, default=1e-6)
    options.add_argument("--restarts", type=int, default=5)
    options.add_argument("--handoff-tol", type=float, default=1e-6)
    options.add_argument("--newton-max-iters", type=int, default=100)

    path = parser.add_argument_group("mountain-pass options")
    path.add_argument("--path-points", type=int, default=64)
    path.add_argument("--deform-steps", type=int, default=10_000)
    path.add_argument("--reparam-every", type=int, default=25)


def setup_commands(subparsers: Any, env: Mapping[str, Any]) -> None:
    # Matrix commands
    parser = subparsers.add_parser("assemble", help="Export the dense system matrix as CSV")
    _common(parser, env)
    parser.set_defaults(handler=assemble)

    parser = subparsers.add_parser("spectrum", help="Extreme eigenvalues and PD certificate")
    _common(parser, env)
    parser.add_argument(
        "--no-full-spectrum",
        dest="full_spectrum",
        action="store_false",
        help="Omit the sorted spectrum from the report",
    )
    parser.set_defaults(handler=spectrum)

    # Solver commands
    parser = subparsers.add_parser("solve", help="Find a critical point of the energy")
    _common(parser, env)
    parser.add_argument("--lambda", dest="lam", type=float, help="Parameter lambda > 0")
    _solver_flags(parser, env)
    parser.set_defaults(handler=solve)

    parser = subparsers.add_parser("sweep", help="Solve over an ascending list of lambdas")
    _common(parser, env)
    parser.add_argument(
        "--lambda", dest="lam", type=float, nargs="+", action="extend", help="Lambda values"
    )
    parser.add_argument(
        "--lambda-range",
        type=float,
        nargs=3,
        metavar=("START", "STOP", "COUNT"),
        help="COUNT evenly spaced lambdas from START to STOP",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=env["threads"],
        help="Concurrent cold-started solves (default: %(default)s)",
    )
    parser.add_argument("--csv", help="Also write one CSV row per lambda")
    _solver_flags(parser, env)
    parser.set_defaults(handler=sweep)

    # Regime commands
    parser = subparsers.add_parser("thresholds", help="Lambda thresholds of each mechanism")
    _common(parser, env)
    parser.add_argument("--lambda", dest="lam", type=float, help="Place lambda in the regimes")
    _alpha(parser)
    _seed(parser, env)
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument(
        "--sphere-radius",
        type=float,
        default=0.1,
        help="Radius of the sampled energy floor around 0 (default: %(default)s)",
    )
    parser.set_defaults(handler=thresholds)

    parser = subparsers.add_parser("check-hypotheses", help="Sampled audit of F hypotheses")
    _common(parser, env)
    parser.add_argument(
        "--hypothesis",
        action="append",
        choices=list(HYPOTHESES) + list(HYPOTHESIS_ALIASES),
        help="Hypothesis to audit; repeatable (default: all with parameters)",
    )
    parser.add_argument("--t-range", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    parser.add_argument("--samples", type=int, default=1000)
    _alpha(parser)
    parser.set_defaults(handler=check_hypotheses)

    # Invariant suite
    parser = subparsers.add_parser("verify", help="Run every invariant against the problem")
    _common(parser, env)
    parser.add_argument("--lambda", dest="lam", type=float)
    _alpha(parser)
    _seed(parser, env)
    parser.add_argument("--samples", type=int, default=50, help="Random fields per check")
    parser.set_defaults(handler=verify)
