import argparse
import functools
import logging
import sys
from typing import Any, Callable, Mapping, Optional

from ..errors import BvpInputError, BvpNumericalError, InvalidParameter
from ..services.grid_problem import GridFunction
from ..services.problem_io import ProblemFile, dumps_report, load_problem_file, write_report
from ..services.regimes import HypothesisParams
from ..services.solvers import SolveOptions, check_lambda

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_INTERNAL = 3

Handler = Callable[[argparse.Namespace], int]


def _report_error(command: str, error: BaseException) -> None:
    logger.error(f"Error in {command}: {error}")
    print(f"error: {error}", file=sys.stderr)


def cli_handler(func: Handler) -> Handler:
    """Map library errors raised by a subcommand to its exit code."""

    @functools.wraps(func)
    def wrapper(args: argparse.Namespace) -> int:
        command = getattr(args, "command", func.__name__)
        try:
            return func(args)
        except BvpInputError as e:
            _report_error(command, e)
            return EXIT_INPUT
        except BvpNumericalError as e:
            _report_error(command, e)
            return EXIT_NUMERICAL
        except Exception as e:
            logger.exception(f"Unexpected error in {command}")
            print(f"internal error: {e}", file=sys.stderr)
            return EXIT_INTERNAL

    return wrapper


def emit_report(payload: Mapping[str, Any], out: Optional[str]) -> None:
    """Write the report to ``out`` or print it to stdout."""
    if out:
        write_report(payload, out)
    else:
        sys.stdout.write(dumps_report(payload))


def load_problem_args(args: argparse.Namespace) -> ProblemFile:
    return load_problem_file(args.problem)


def resolve_lambda(args: argparse.Namespace, problem: ProblemFile) -> float:
    """--lambda wins over the problem file's "lambda"."""
    lam = args.lam if args.lam is not None else problem.lam
    if lam is None:
        raise InvalidParameter("lambda is required (--lambda or the problem file)", field="lambda")
    return check_lambda(lam)


def resolve_params(args: argparse.Namespace, problem: ProblemFile) -> HypothesisParams:
    params = problem.hypotheses or HypothesisParams()
    alpha = getattr(args, "alpha", None)
    if alpha is None:
        return params
    data = params.to_dict()
    data["alpha"] = alpha
    return HypothesisParams.from_dict(data)


def solve_options(args: argparse.Namespace) -> SolveOptions:
    return SolveOptions(
        grad_tol=args.grad_tol,
        max_iters=args.max_iters,
        armijo_c=args.armijo_c,
        backtrack_ratio=args.backtrack_ratio,
        initial_step=args.initial_step,
        nontrivial_tol=args.nontrivial_tol,
        seed=args.seed,
        restarts=args.restarts,
        handoff_tol=args.handoff_tol,
        newton_max_iters=args.newton_max_iters,
        record_trace=args.trace,
    )


def start_field(args: argparse.Namespace, problem: ProblemFile) -> Optional[GridFunction]:
    if args.start_value is None:
        return None
    instance = problem.instance
    return GridFunction.constant(instance.m, instance.n, args.start_value)
