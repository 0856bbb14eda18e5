"""System matrix M, the five-point weighted stencil, H(U) and the residual MU - lambda H(U).

M is stored in LAPACK upper symmetric band form (as used by
``scipy.linalg.eig_banded``/``cholesky_banded``): ``band[m + k - l, l] = M[k, l]``
for ``l - m <= k <= l``, zero based. Half-bandwidth is m.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import IndexOutOfRange, InvalidParameter, ShapeMismatch
from .grid_problem import GridFunction, ProblemInstance, WeightGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SystemMatrix:
    order: int
    bandwidth: int
    band: np.ndarray

    def __post_init__(self) -> None:
        if self.band.shape != (self.bandwidth + 1, self.order):
            raise ShapeMismatch(
                f"band storage must have shape ({self.bandwidth + 1}, {self.order}), "
                f"got {self.band.shape}"
            )

    @classmethod
    def from_dense(cls, dense: np.ndarray, bandwidth: Optional[int] = None) -> "SystemMatrix":
        """Pack the upper band of a symmetric matrix; entries outside the band are dropped."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ShapeMismatch(f"expected a square matrix, got shape {dense.shape}")
        if not np.array_equal(dense, dense.T):
            raise InvalidParameter("matrix is not symmetric")
        order = dense.shape[0]
        bandwidth = order - 1 if bandwidth is None else bandwidth
        band = np.zeros((bandwidth + 1, order))
        for d in range(min(bandwidth, order - 1) + 1):
            band[bandwidth - d, d:] = np.diagonal(dense, offset=d)
        band.setflags(write=False)
        return cls(order=order, bandwidth=bandwidth, band=band)

    def upper_diagonal(self, offset: int) -> np.ndarray:
        """Entries M[l - offset, l] for l = offset, ..., order - 1."""
        if offset > self.bandwidth:
            return np.zeros(max(self.order - offset, 0))
        return self.band[self.bandwidth - offset, offset:]

    @property
    def diagonal(self) -> np.ndarray:
        return self.upper_diagonal(0)

    def trace(self) -> float:
        return float(np.sum(self.diagonal))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.order, self.order))
        for d in range(min(self.bandwidth, self.order - 1) + 1):
            values = self.upper_diagonal(d)
            dense += np.diag(values, k=d)
            if d:
                dense += np.diag(values, k=-d)
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """M @ x for a vector or for a (order, k) stack of column vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.order:
            raise ShapeMismatch(f"vector length {x.shape[0]} does not match order {self.order}")
        expand = (slice(None),) + (None,) * (x.ndim - 1)
        y = self.diagonal[expand] * x
        for d in range(1, min(self.bandwidth, self.order - 1) + 1):
            values = self.upper_diagonal(d)
            if not values.any():
                continue
            values = values[expand]
            y[:-d] += values * x[d:]
            y[d:] += values * x[:-d]
        return y

    def quadratic_form(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.matvec(x))

    def norm_inf(self) -> float:
        return float(np.max(np.sum(np.abs(self.to_dense()), axis=1)))

    def frobenius_norm(self) -> float:
        off = sum(float(np.sum(self.upper_diagonal(d) ** 2)) for d in range(1, self.bandwidth + 1))
        return float(np.sqrt(np.sum(self.diagonal**2) + 2.0 * off))

    def general_band(self, diagonal_shift: Optional[np.ndarray] = None) -> np.ndarray:
        """(2w + 1, order) storage for ``scipy.linalg.solve_banded((w, w), ...)``.

        ``diagonal_shift`` is added to the diagonal, giving M + diag(shift).
        """
        w = self.bandwidth
        ab = np.zeros((2 * w + 1, self.order))
        ab[w] = self.diagonal
        if diagonal_shift is not None:
            ab[w] += diagonal_shift
        for d in range(1, min(w, self.order - 1) + 1):
            values = self.upper_diagonal(d)
            ab[w - d, d:] = values
            ab[w + d, : self.order - d] = values
        return ab


def assemble_L(grid: WeightGrid, j: int) -> np.ndarray:
    """Tridiagonal block for grid row j.

    Diagonal p(k-1, j) + 2p(k, j) + p(k, j-1), off-diagonal -p(k, j).
    """
    if not 1 <= j <= grid.n:
        raise IndexOutOfRange(f"block index j={j} outside [1, {grid.n}]")
    p = grid.p
    k = np.arange(1, grid.m + 1)
    block = np.diag(p[k - 1, j] + 2.0 * p[k, j] + p[k, j - 1])
    off = -p[1 : grid.m, j]
    block += np.diag(off, k=1) + np.diag(off, k=-1)
    return block


def assemble_P(grid: WeightGrid, j: int) -> np.ndarray:
    """Coupling block between grid rows j and j + 1 (enters M with a minus sign)."""
    if not 1 <= j <= grid.n - 1:
        raise IndexOutOfRange(f"coupling index j={j} outside [1, {grid.n - 1}]")
    return np.diag(grid.p[1:, j])


def assemble_M(grid: WeightGrid) -> SystemMatrix:
    m, n = grid.m, grid.n
    order = m * n
    band = np.zeros((m + 1, order))
    for j in range(1, n + 1):
        start = (j - 1) * m
        block = assemble_L(grid, j)
        band[m, start : start + m] = np.diagonal(block)
        if m > 1:
            band[m - 1, start + 1 : start + m] = np.diagonal(block, offset=1)
    # coupling blocks sit m places off the diagonal; an empty range when n = 1
    for j in range(1, n):
        start = j * m
        band[0, start : start + m] = -np.diagonal(assemble_P(grid, j))
    band.setflags(write=False)
    logger.debug(f"Assembled system matrix of order {order} with half-bandwidth {m}")
    return SystemMatrix(order=order, bandwidth=m, band=band)


def check_grid_shape(grid: WeightGrid, U: GridFunction) -> None:
    if U.shape != (grid.m, grid.n):
        raise ShapeMismatch(f"grid function shape {U.shape} does not match ({grid.m}, {grid.n})")


def apply_stencil(grid: WeightGrid, U: GridFunction) -> GridFunction:
    """Left-hand side of the five-point weighted difference equation, zero boundary values."""
    check_grid_shape(grid, U)
    m, n = grid.m, grid.n
    u = U.padded()
    p = grid.p
    centre = u[1 : m + 1, 1 : n + 1]
    west = u[0:m, 1 : n + 1]
    east = u[2 : m + 2, 1 : n + 1]
    south = u[1 : m + 1, 0:n]
    north = u[1 : m + 1, 2 : n + 2]
    p_here = p[1 : m + 1, 1 : n + 1]
    p_west = p[0:m, 1 : n + 1]
    p_south = p[1 : m + 1, 0:n]
    out = (
        -p_west * west
        + (p_west + 2.0 * p_here + p_south) * centre
        - p_here * east
        - p_south * south
        - p_here * north
    )
    return GridFunction.from_values(out)


def nonlinear_map(instance: ProblemInstance, U: GridFunction) -> GridFunction:
    """H(U): f((i, j), u(i, j)) node by node."""
    instance.check_shape(U)
    return GridFunction.from_values(instance.nonlinearity.f_values(U.values))


def check_lambda(lam: float, allow_zero: bool = False) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0 or (lam == 0 and not allow_zero):
        raise InvalidParameter("lambda must be positive", field="lambda")
    return lam


def residual(
    instance: ProblemInstance,
    U: GridFunction,
    lam: float,
    M: Optional[SystemMatrix] = None,
) -> GridFunction:
    """M U - lambda H(U); zero exactly at solutions."""
    lam = check_lambda(lam)
    instance.check_shape(U)
    if M is None:
        M = assemble_M(instance.grid)
    values = M.matvec(U.flat) - lam * instance.nonlinearity.f_values(U.values).flatten(order="F")
    return GridFunction.from_flat(instance.m, instance.n, values)
