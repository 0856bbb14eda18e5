"""Problem data: weight grids, grid functions and problem instances.

Index conventions follow the difference equation: weights p(i, j) live on
[0, m] x [0, n] and are stored as ``p[i, j]``; unknowns u(i, j) live on the
interior [1, m] x [1, n] and are stored as ``values[i - 1, j - 1]``. The flat
vector stacks column blocks U_j = (u(1, j), ..., u(m, j)), i.e. Fortran order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Tuple, Union

import numpy as np

from ..errors import (
    BoundaryWeightNonzero,
    IndexOutOfRange,
    InvalidParameter,
    NonpositiveInteriorWeight,
    ShapeMismatch,
)

if TYPE_CHECKING:
    from .nonlinearity import NonlinearitySpec

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Iterable]


def _frozen_array(values: ArrayLike) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


def _check_dims(m: int, n: int) -> None:
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise InvalidParameter(f"grid sizes must be positive integers, got m={m}, n={n}")


@dataclass(frozen=True, eq=False)
class WeightGrid:
    """Weights p(i, j) on [0, m] x [0, n]; build through `make_weight_grid`."""

    m: int
    n: int
    p: np.ndarray

    def weight(self, i: int, j: int) -> float:
        if not (0 <= i <= self.m and 0 <= j <= self.n):
            raise IndexOutOfRange(f"weight index ({i}, {j}) outside [0,{self.m}]x[0,{self.n}]")
        return float(self.p[i, j])

    @property
    def interior(self) -> np.ndarray:
        """p restricted to [1, m] x [1, n] as an (m, n) array."""
        return self.p[1:, 1:]

    def scaled(self, factor: float) -> "WeightGrid":
        if factor <= 0:
            raise InvalidParameter(f"scale factor must be positive, got {factor}")
        return make_weight_grid(self.m, self.n, self.p * factor)


def make_weight_grid(m: int, n: int, entries: ArrayLike) -> WeightGrid:
    """Validate a weight table indexed entries[i][j] = p(i, j).

    p(0, j) = 0 for j in [1, n] and p(i, 0) = 0 for i in [1, m] are required;
    every interior weight must be strictly positive. p(0, 0) is never read.
    """
    _check_dims(m, n)
    table = np.array(entries, dtype=np.float64)
    if table.shape != (m + 1, n + 1):
        raise ShapeMismatch(f"weight table must have shape ({m + 1}, {n + 1}), got {table.shape}")

    for j in range(1, n + 1):
        if table[0, j] != 0.0:
            raise BoundaryWeightNonzero(f"p(0,{j}) must be 0, got {table[0, j]!r}", (0, j))
    for i in range(1, m + 1):
        if table[i, 0] != 0.0:
            raise BoundaryWeightNonzero(f"p({i},0) must be 0, got {table[i, 0]!r}", (i, 0))

    interior = table[1:, 1:]
    bad = np.argwhere(~(interior > 0.0) | ~np.isfinite(interior))
    if bad.size:
        i, j = (int(k) + 1 for k in bad[0])
        raise NonpositiveInteriorWeight(
            f"p({i},{j}) must be positive and finite, got {table[i, j]!r}", (i, j)
        )

    return WeightGrid(m=int(m), n=int(n), p=_frozen_array(table))


def uniform_weight_grid(m: int, n: int, value: float = 1.0) -> WeightGrid:
    _check_dims(m, n)
    table = np.zeros((m + 1, n + 1))
    table[1:, 1:] = value
    return make_weight_grid(m, n, table)


def random_weight_grid(
    m: int, n: int, rng: np.random.Generator, low: float = 0.1, high: float = 10.0
) -> WeightGrid:
    _check_dims(m, n)
    table = np.zeros((m + 1, n + 1))
    table[1:, 1:] = rng.uniform(low, high, size=(m, n))
    return make_weight_grid(m, n, table)


def flatten_index(i: int, j: int, m: int, n: int | None = None) -> int:
    """1-based position of node (i, j) in the stacked vector: (j - 1) m + i."""
    if m < 1 or not 1 <= i <= m or j < 1 or (n is not None and j > n):
        raise IndexOutOfRange(f"node ({i}, {j}) outside the interior grid (m={m}, n={n})")
    return (j - 1) * m + i


def unflatten_index(k: int, m: int, n: int) -> Tuple[int, int]:
    if m < 1 or n < 1 or not 1 <= k <= m * n:
        raise IndexOutOfRange(f"flat index {k} outside [1, {m * n}]")
    j, i = divmod(k - 1, m)
    return i + 1, j + 1


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Candidate solution u(i, j) on the interior grid; boundary values are zero."""

    m: int
    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.m, self.n):
            raise ShapeMismatch(
                f"grid function values must have shape ({self.m}, {self.n}), "
                f"got {self.values.shape}"
            )

    @classmethod
    def from_values(cls, values: ArrayLike) -> "GridFunction":
        array = _frozen_array(values)
        if array.ndim != 2:
            raise ShapeMismatch(f"grid function table must be 2-D, got {array.ndim}-D")
        m, n = array.shape
        return cls(m=m, n=n, values=array)

    @classmethod
    def from_flat(cls, m: int, n: int, flat: ArrayLike) -> "GridFunction":
        vector = np.asarray(flat, dtype=np.float64)
        if vector.shape != (m * n,):
            raise ShapeMismatch(f"flat vector must have length {m * n}, got {vector.shape}")
        return cls(m=m, n=n, values=_frozen_array(vector.reshape((m, n), order="F")))

    @classmethod
    def zeros(cls, m: int, n: int) -> "GridFunction":
        return cls(m=m, n=n, values=_frozen_array(np.zeros((m, n))))

    @classmethod
    def constant(cls, m: int, n: int, value: float) -> "GridFunction":
        return cls(m=m, n=n, values=_frozen_array(np.full((m, n), float(value))))

    @property
    def flat(self) -> np.ndarray:
        return self.values.flatten(order="F")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m, self.n

    def at(self, i: int, j: int) -> float:
        flatten_index(i, j, self.m, self.n)
        return float(self.values[i - 1, j - 1])

    def padded(self) -> np.ndarray:
        """Values on [0, m+1] x [0, n+1] with the zero boundary filled in."""
        out = np.zeros((self.m + 2, self.n + 2))
        out[1:-1, 1:-1] = self.values
        return out


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    grid: WeightGrid
    nonlinearity: "NonlinearitySpec"

    def __post_init__(self) -> None:
        coefficient = self.nonlinearity.coefficient
        if coefficient is not None and coefficient.shape != (self.grid.m, self.grid.n):
            raise ShapeMismatch(
                f"nonlinearity coefficient has shape {coefficient.shape}, "
                f"grid interior is ({self.grid.m}, {self.grid.n})"
            )
        table_shape = self.nonlinearity.node_table_shape
        if table_shape is not None and table_shape != (self.grid.m, self.grid.n):
            raise ShapeMismatch(
                f"tabulated nonlinearity covers {table_shape} nodes, "
                f"grid interior is ({self.grid.m}, {self.grid.n})"
            )

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def size(self) -> int:
        return self.grid.m * self.grid.n

    def check_shape(self, U: GridFunction) -> None:
        if U.shape != (self.m, self.n):
            raise ShapeMismatch(
                f"grid function shape {U.shape} does not match ({self.m}, {self.n})"
            )
