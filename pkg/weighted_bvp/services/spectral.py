"""Spectrum of M, positive-definiteness certificate and the quadratic-form lower bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eig_banded

from ..errors import InvalidParameter, JacobiNonconvergent
from .assembly import SystemMatrix, assemble_L, assemble_M, check_grid_shape
from .grid_problem import GridFunction, WeightGrid

logger = logging.getLogger(__name__)

JACOBI_MAX_SWEEPS = 100
JACOBI_RELATIVE_THRESHOLD = 1e-12
BOUND_SLACK = 1e-10

EIGENSOLVERS = ("jacobi", "banded")


@dataclass(frozen=True)
class PositiveDefiniteCertificate:
    positive_definite: bool
    pivots: Tuple[float, ...]
    # 1-based index of the first nonpositive pivot
    failed_at: Optional[int] = None


@dataclass(frozen=True)
class SpectrumSummary:
    lambda_min: float
    lambda_max: float
    trace: float
    full_spectrum: Optional[Tuple[float, ...]] = None
    pd_certificate: Optional[PositiveDefiniteCertificate] = None
    sweeps: int = 0
    method: str = "jacobi"

    @property
    def positive_definite(self) -> bool:
        if self.pd_certificate is not None:
            return self.pd_certificate.positive_definite
        return self.lambda_min > 0.0


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diagonal(a))))


def jacobi_eigenvalues(
    dense: np.ndarray,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
    relative_threshold: float = JACOBI_RELATIVE_THRESHOLD,
) -> Tuple[np.ndarray, int]:
    """Cyclic Jacobi rotations on a symmetric matrix; returns (unsorted eigenvalues, sweeps)."""
    a = np.array(dense, dtype=np.float64)
    size = a.shape[0]
    threshold = relative_threshold * float(np.linalg.norm(a))

    for sweep in range(max_sweeps + 1):
        if _off_diagonal_norm(a) <= threshold:
            return np.diagonal(a).copy(), sweep
        if sweep == max_sweeps:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

    raise JacobiNonconvergent(
        f"off-diagonal norm {_off_diagonal_norm(a):.3e} above {threshold:.3e} "
        f"after {max_sweeps} sweeps"
    )


def certify_positive_definite(M: SystemMatrix) -> PositiveDefiniteCertificate:
    """Banded Cholesky factorisation; pivots are the diagonal of the triangular factor."""
    w = M.bandwidth
    order = M.order
    # rows of L restricted to the band: factor[i, k] = L[i, i - w + k]
    factor = np.zeros((order, w + 1))
    pivots: List[float] = []

    def entry(i: int, j: int) -> float:
        # M[i, j] with j <= i, i - j <= w
        return float(M.band[w - (i - j), i])

    for j in range(order):
        lo = max(0, j - w)
        row_j = factor[j, w - (j - lo) : w]
        pivot = entry(j, j) - float(row_j @ row_j)
        if not pivot > 0.0:
            logger.info(f"Cholesky pivot {j + 1} is nonpositive ({pivot:.3e})")
            return PositiveDefiniteCertificate(False, tuple(pivots), failed_at=j + 1)
        root = float(np.sqrt(pivot))
        factor[j, w] = root
        pivots.append(root)
        for i in range(j + 1, min(order, j + w + 1)):
            lo_i = max(0, i - w)
            start = max(lo, lo_i)
            # L[i, start:j] and L[j, start:j]
            li = factor[i, w - (i - start) : w - (i - j)]
            lj = factor[j, w - (j - start) : w]
            factor[i, w - (i - j)] = (entry(i, j) - float(li @ lj)) / root

    return PositiveDefiniteCertificate(True, tuple(pivots))


def eigen_extremes(
    M: SystemMatrix, method: str = "jacobi", keep_spectrum: bool = True
) -> SpectrumSummary:
    """Sorted spectrum of M with its extremes and the positive-definiteness certificate."""
    if method not in EIGENSOLVERS:
        raise InvalidParameter(f"eigensolver must be one of {EIGENSOLVERS}, got '{method}'")
    sweeps = 0
    if method == "jacobi":
        values, sweeps = jacobi_eigenvalues(M.to_dense())
        # stable sort: ties keep their original diagonal position
        values = values[np.argsort(values, kind="stable")]
    else:
        values = eig_banded(M.band, lower=False, eigvals_only=True)
        values = np.sort(values, kind="stable")

    logger.info(
        f"Spectrum of order {M.order} via {method}: "
        f"lambda_min={values[0]:.6g}, lambda_max={values[-1]:.6g}, sweeps={sweeps}"
    )
    return SpectrumSummary(
        lambda_min=float(values[0]),
        lambda_max=float(values[-1]),
        trace=M.trace(),
        full_spectrum=tuple(float(v) for v in values) if keep_spectrum else None,
        pd_certificate=certify_positive_definite(M),
        sweeps=sweeps,
        method=method,
    )


@dataclass(frozen=True)
class QuadraticBoundCheck:
    lhs: float
    rhs: float
    holds: bool
    # first grid row j whose block bound X_j' L_j X_j >= sum (p(i,j) + p(i,j-1)) x_ij^2 fails
    block_violation: Optional[int] = None
    block_lhs: Optional[float] = None
    block_rhs: Optional[float] = None


def quadratic_form_lower_bound_check(grid: WeightGrid, X: GridFunction) -> QuadraticBoundCheck:
    """X'MX against the telescoped lower bound that proves M positive definite."""
    check_grid_shape(grid, X)
    x = X.values
    p = grid.p
    lhs = assemble_M(grid).quadratic_form(X.flat)

    vertical = p[1:, 1 : grid.n] * (x[:, :-1] - x[:, 1:]) ** 2
    rhs = float(np.sum(vertical) + np.sum(p[1:, grid.n] * x[:, -1] ** 2))
    holds = lhs >= rhs - BOUND_SLACK * abs(lhs)

    violation: Tuple[Optional[int], Optional[float], Optional[float]] = (None, None, None)
    for j in range(1, grid.n + 1):
        xj = x[:, j - 1]
        block_lhs = float(xj @ assemble_L(grid, j) @ xj)
        block_rhs = float(np.sum((p[1:, j] + p[1:, j - 1]) * xj**2))
        if block_lhs < block_rhs - BOUND_SLACK * abs(block_lhs):
            violation = (j, block_lhs, block_rhs)
            break

    return QuadraticBoundCheck(
        lhs=lhs,
        rhs=rhs,
        holds=bool(holds and violation[0] is None),
        block_violation=violation[0],
        block_lhs=violation[1],
        block_rhs=violation[2],
    )
