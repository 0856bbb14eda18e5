import argparse
import logging

from ..services.invariants import failed_checks, run_invariants
from ..services.problem_io import verify_to_dict, write_report
from ..services.solvers import check_lambda
from .common import EXIT_INTERNAL, EXIT_OK, cli_handler, load_problem_args, resolve_params

logger = logging.getLogger(__name__)


@cli_handler
def verify(args: argparse.Namespace) -> int:
    """Run every module invariant against the problem and print a pass/fail/skip table."""
    problem = load_problem_args(args)
    lam = args.lam if args.lam is not None else problem.lam
    frame = run_invariants(
        problem.instance,
        lam=None if lam is None else check_lambda(lam),
        params=resolve_params(args, problem),
        seed=args.seed,
        samples=args.samples,
        eigensolver=args.eigensolver,
    )
    table = frame.assign(status=frame["status"].str.replace("fail", "FAIL"))
    print(table.to_string(index=False))
    if args.out:
        write_report(verify_to_dict(frame), args.out)

    failed = failed_checks(frame)
    if failed:
        logger.error(f"Invariant checks failed: {', '.join(failed)}")
        return EXIT_INTERNAL
    return EXIT_OK
