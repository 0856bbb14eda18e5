import argparse
import logging
import sys

from ..services.assembly import assemble_M
from ..services.problem_io import matrix_frame, spectrum_to_dict, write_matrix_csv
from ..services.spectral import eigen_extremes
from .common import EXIT_OK, cli_handler, emit_report, load_problem_args

logger = logging.getLogger(__name__)


@cli_handler
def assemble(args: argparse.Namespace) -> int:
    """Dense system matrix as CSV, 17 significant digits."""
    problem = load_problem_args(args)
    M = assemble_M(problem.instance.grid)
    logger.info(f"Assembled M of order {M.order}, bandwidth {M.bandwidth}")
    if args.out:
        write_matrix_csv(M, args.out)
    else:
        matrix_frame(M).to_csv(sys.stdout, float_format="%.17g")
    return EXIT_OK


@cli_handler
def spectrum(args: argparse.Namespace) -> int:
    problem = load_problem_args(args)
    M = assemble_M(problem.instance.grid)
    summary = eigen_extremes(M, method=args.eigensolver, keep_spectrum=args.full_spectrum)
    emit_report(spectrum_to_dict(summary), args.out)
    return EXIT_OK
