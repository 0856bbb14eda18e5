import argparse
import logging
from typing import Any, Dict, List

import numpy as np

from ..errors import InvalidParameter
from ..services.problem_io import (
    ProblemFile,
    solve_report_to_dict,
    sweep_to_dict,
    write_sweep_csv,
)
from ..services.solvers import MountainPassOptions, solve as run_solve, sweep_lambda
from .common import (
    EXIT_NUMERICAL,
    EXIT_OK,
    cli_handler,
    emit_report,
    load_problem_args,
    resolve_lambda,
    resolve_params,
    solve_options,
    start_field,
)

logger = logging.getLogger(__name__)

CLI_METHODS = {
    "global": "global_min",
    "sublevel": "sublevel_min",
    "mountain-pass": "mountain_pass",
    "newton": "newton",
}


def _method_kwargs(args: argparse.Namespace, problem: ProblemFile, method: str) -> Dict[str, Any]:
    kwargs: Dict[str, Any] = {"eigensolver": args.eigensolver}
    if method == "sublevel_min":
        kwargs["alpha"] = resolve_params(args, problem).alpha
    elif method == "mountain_pass":
        kwargs["mp"] = MountainPassOptions(
            path_points=args.path_points,
            deform_steps=args.deform_steps,
            seed=args.seed,
            reparam_every=args.reparam_every,
        )
    return kwargs


@cli_handler
def solve(args: argparse.Namespace) -> int:
    problem = load_problem_args(args)
    lam = resolve_lambda(args, problem)
    method = CLI_METHODS[args.method]
    opts = solve_options(args)

    report = run_solve(
        problem.instance,
        lam,
        method,
        opts,
        warm_start=start_field(args, problem),
        **_method_kwargs(args, problem, method),
    )
    logger.info(
        f"{method} at lambda={lam:g}: converged={report.converged}, "
        f"nontrivial={report.nontrivial}, energy={report.energy.total:.12g}"
    )
    emit_report(solve_report_to_dict(report), args.out)
    # the best-so-far report is on disk before an unconverged solve fails
    report.raise_for_convergence()
    return EXIT_OK


def _sweep_lambdas(args: argparse.Namespace, problem: ProblemFile) -> List[float]:
    lambdas: List[float] = list(args.lam or [])
    if args.lambda_range is not None:
        start, stop, count = args.lambda_range
        if int(count) != count or count < 1:
            raise InvalidParameter("--lambda-range count must be a positive integer", field="count")
        lambdas.extend(float(v) for v in np.linspace(start, stop, int(count)))
    if not lambdas and problem.lam is not None:
        lambdas.append(problem.lam)
    return sorted(lambdas)


@cli_handler
def sweep(args: argparse.Namespace) -> int:
    problem = load_problem_args(args)
    method = CLI_METHODS[args.method]
    entries = sweep_lambda(
        problem.instance,
        _sweep_lambdas(args, problem),
        method,
        solve_options(args),
        threads=args.threads,
        **_method_kwargs(args, problem, method),
    )
    emit_report(sweep_to_dict(method, entries), args.out)
    if args.csv:
        write_sweep_csv(entries, args.csv)

    failed = [e.lam for e in entries if e.report is None or not e.report.converged]
    if failed:
        logger.warning(f"Sweep left {len(failed)} of {len(entries)} lambdas unsolved: {failed}")
        return EXIT_NUMERICAL
    return EXIT_OK
