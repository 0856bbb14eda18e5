import argparse
import logging

from ..services.assembly import assemble_M
from ..services.problem_io import (
    hypothesis_batch_to_dict,
    hypothesis_to_dict,
    regime_to_dict,
    thresholds_to_dict,
)
from ..services.regimes import (
    check_hypothesis,
    hypothesis_name,
    ready_hypotheses,
    regime_report,
    thresholds as compute_thresholds,
)
from ..services.solvers import check_lambda
from ..services.spectral import eigen_extremes
from .common import EXIT_OK, cli_handler, emit_report, load_problem_args, resolve_params

logger = logging.getLogger(__name__)


@cli_handler
def thresholds(args: argparse.Namespace) -> int:
    """Threshold report; with a lambda, the full regime report around it."""
    problem = load_problem_args(args)
    params = resolve_params(args, problem)
    spectrum = eigen_extremes(
        assemble_M(problem.instance.grid), method=args.eigensolver, keep_spectrum=False
    )
    lam = args.lam if args.lam is not None else problem.lam
    if lam is None:
        report = compute_thresholds(problem.instance, spectrum, params)
        emit_report(thresholds_to_dict(report), args.out)
        return EXIT_OK

    report = regime_report(
        problem.instance,
        spectrum,
        check_lambda(lam),
        params,
        samples=args.samples,
        sphere_radius=args.sphere_radius,
        seed=args.seed,
    )
    for verdict in report.mechanisms:
        logger.info(
            f"{verdict.mechanism}: interval={verdict.interval}, "
            f"contains lambda={verdict.contains_lambda}"
        )
    if report.sphere_floor.min_energy <= 0:
        logger.info("Energy is not positive on the sampled sphere; no mountain ring around 0")
    emit_report(regime_to_dict(report), args.out)
    return EXIT_OK


@cli_handler
def check_hypotheses(args: argparse.Namespace) -> int:
    problem = load_problem_args(args)
    params = resolve_params(args, problem)
    if args.hypothesis:
        names = [hypothesis_name(h) for h in args.hypothesis]
    else:
        names = list(ready_hypotheses(params))

    reports = [
        check_hypothesis(
            problem.instance,
            name,
            params,
            t_range=tuple(args.t_range) if args.t_range else None,
            samples=args.samples,
        )
        for name in names
    ]
    for report in reports:
        if report.witness is not None:
            logger.warning(
                f"{report.hypothesis} violated at node {report.witness.node}, "
                f"t={report.witness.t:.6g}, F={report.witness.value:.6g}"
            )
    if len(reports) == 1:
        emit_report(hypothesis_to_dict(reports[0]), args.out)
    else:
        emit_report(hypothesis_batch_to_dict(reports), args.out)
    return EXIT_OK
