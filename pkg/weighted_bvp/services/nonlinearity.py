"""Nonlinearity catalogue: f((i, j), t) = coefficient(i, j) * f_kind(t) and its primitive F.

Every kernel evaluates element-wise on numpy arrays. The tabulated kernel may
carry one table per node; for it the ``where`` argument selects the node
((i-1, j-1), zero based) or, when None, pairs an (m, n) array of arguments
with the node tables positionally.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from ..errors import (
    IndexOutOfRange,
    InvalidParameter,
    QuadratureNonconvergent,
    TabulatedOutOfRange,
    UnknownKind,
)

logger = logging.getLogger(__name__)

Node = Tuple[int, int]
Where = Optional[Tuple[int, int]]

QUADRATURE_TOL = 1e-10
QUADRATURE_MAX_DEPTH = 50
FD_DERIVATIVE_STEP = 1e-7

PRIMITIVE_MODES = ("closed_form", "quadrature")


class Kernel(ABC):
    name: str = ""
    # f(0) = 0 for every built-in closed kernel
    zero_preserving: bool = True

    @abstractmethod
    def f(self, t: np.ndarray, where: Where = None) -> np.ndarray: ...

    @abstractmethod
    def F(self, t: np.ndarray, where: Where = None) -> np.ndarray: ...

    def df(self, t: np.ndarray, where: Where = None) -> Optional[np.ndarray]:
        """Closed-form f'; None when the kernel has none."""
        return None

    def params(self) -> Dict[str, Any]:
        return {}

    def argument_range(self) -> Tuple[float, float]:
        return -np.inf, np.inf


def _take(params: Mapping[str, Any], allowed: Mapping[str, Any]) -> Dict[str, Any]:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise InvalidParameter(f"unexpected parameter '{unknown[0]}'", field=unknown[0])
    merged = dict(allowed)
    for name, value in params.items():
        if name in ("t_grid", "values"):
            merged[name] = value
            continue
        try:
            merged[name] = float(value)
        except (TypeError, ValueError):
            raise InvalidParameter(f"parameter '{name}' must be a number", field=name)
        if not np.isfinite(merged[name]):
            raise InvalidParameter(f"parameter '{name}' must be finite", field=name)
    return merged


class LinearKernel(Kernel):
    name = "linear"

    def __init__(self, slope: float = 1.0):
        self.slope = slope

    def f(self, t, where=None):
        return self.slope * np.asarray(t, dtype=np.float64)

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return 0.5 * self.slope * t * t

    def df(self, t, where=None):
        return np.full_like(np.asarray(t, dtype=np.float64), self.slope)

    def params(self):
        return {"slope": self.slope}


class CubicSofteningKernel(Kernel):
    """f = 2t - t^3, F = t^2 - t^4 / 4."""

    name = "cubic_softening"

    def f(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return 2.0 * t - t**3

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return t * t - 0.25 * t**4

    def df(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return 2.0 - 3.0 * t * t


class PowerKernel(Kernel):
    """f = s sign(t) |t|^(gamma - 1), F = s |t|^gamma / gamma, gamma > 1."""

    name = "power"

    def __init__(self, s: float = 1.0, gamma: float = 2.0):
        if gamma <= 1.0:
            raise InvalidParameter(
                f"power exponent gamma must exceed 1, got {gamma}", field="gamma"
            )
        self.s = s
        self.gamma = gamma

    def f(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return self.s * np.sign(t) * np.abs(t) ** (self.gamma - 1.0)

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return self.s * np.abs(t) ** self.gamma / self.gamma

    def df(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            # infinite at t = 0 when gamma < 2
            return self.s * (self.gamma - 1.0) * np.abs(t) ** (self.gamma - 2.0)

    def params(self):
        return {"s": self.s, "gamma": self.gamma}


class RationalQuarticKernel(Kernel):
    """F = t^4 / (1 + t^2)."""

    name = "rational_quartic"

    def f(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        t2 = t * t
        return 2.0 * t**3 * (2.0 + t2) / (1.0 + t2) ** 2

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        t2 = t * t
        return t2 * t2 / (1.0 + t2)

    def df(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        t2 = t * t
        return (2.0 * t2**3 + 6.0 * t2**2 + 12.0 * t2) / (1.0 + t2) ** 3


class DampedQuadraticKernel(Kernel):
    """F = -t^2 exp(-|t|)."""

    name = "damped_quadratic"

    def f(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t)
        return -t * (2.0 - a) * np.exp(-a)

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        return -t * t * np.exp(-np.abs(t))

    def df(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t)
        return -(2.0 - 4.0 * a + t * t) * np.exp(-a)


class TabulatedKernel(Kernel):
    """f given on a fixed ascending t-lattice, linearly interpolated.

    ``values`` is either one table of length K shared by every node or an
    (m, n, K) array with one table per node. The lattice must contain 0 so
    that F can be integrated from the origin.
    """

    name = "tabulated"
    zero_preserving = False

    def __init__(self, t_grid: Any = None, values: Any = None):
        if t_grid is None or values is None:
            raise InvalidParameter("tabulated kind needs 't_grid' and 'values'", field="t_grid")
        self.t_grid = np.array(t_grid, dtype=np.float64)
        self.values = np.array(values, dtype=np.float64)
        if self.t_grid.ndim != 1 or self.t_grid.size < 2:
            raise InvalidParameter("t_grid must be a list of at least two points", field="t_grid")
        if np.any(np.diff(self.t_grid) <= 0) or not np.all(np.isfinite(self.t_grid)):
            raise InvalidParameter("t_grid must be finite and strictly ascending", field="t_grid")
        if not self.t_grid[0] <= 0.0 <= self.t_grid[-1]:
            raise InvalidParameter("t_grid must bracket 0", field="t_grid")
        if self.values.ndim not in (1, 3) or self.values.shape[-1] != self.t_grid.size:
            raise InvalidParameter(
                f"values must have shape ({self.t_grid.size},) or (m, n, {self.t_grid.size})",
                field="values",
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("values must be finite", field="values")
        self.t_grid.setflags(write=False)
        self.values.setflags(write=False)

        widths = np.diff(self.t_grid)
        segment = 0.5 * widths * (self.values[..., :-1] + self.values[..., 1:])
        lead = np.zeros(self.values.shape[:-1] + (1,))
        self._cumulative = np.concatenate([lead, np.cumsum(segment, axis=-1)], axis=-1)
        self._origin = self._antiderivative(np.zeros(self.values.shape[:-1]), None, per_node=True)

    @property
    def per_node(self) -> bool:
        return self.values.ndim == 3

    @property
    def node_shape(self) -> Optional[Tuple[int, int]]:
        return self.values.shape[:2] if self.per_node else None

    def argument_range(self):
        return float(self.t_grid[0]), float(self.t_grid[-1])

    def _check_range(self, t: np.ndarray) -> None:
        lo, hi = self.argument_range()
        outside = (t < lo) | (t > hi)
        if np.any(outside):
            bad = float(np.asarray(t)[outside].flat[0])
            raise TabulatedOutOfRange(f"t={bad!r} outside the tabulated range [{lo}, {hi}]")

    def _tables(self, t: np.ndarray, where: Where, per_node: bool = False):
        """Return (values, cumulative) tables aligned with t along the last axis."""
        if not self.per_node:
            return self.values, self._cumulative, False
        if where is not None:
            i0, j0 = where
            return self.values[i0, j0], self._cumulative[i0, j0], False
        if t.shape != self.values.shape[:2] and not per_node:
            raise InvalidParameter(
                f"per-node tables need arguments of shape {self.values.shape[:2]}, got {t.shape}"
            )
        return self.values, self._cumulative, True

    def _segments(self, t: np.ndarray):
        k = self.t_grid.size
        idx = np.clip(np.searchsorted(self.t_grid, t, side="right") - 1, 0, k - 2)
        left = self.t_grid[idx]
        width = self.t_grid[idx + 1] - left
        return idx, left, width

    @staticmethod
    def _pick(table: np.ndarray, idx: np.ndarray, aligned: bool) -> np.ndarray:
        if aligned:
            return np.take_along_axis(table, idx[..., None], axis=-1)[..., 0]
        return table[idx]

    def f(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        self._check_range(t)
        values, _, aligned = self._tables(t, where)
        idx, left, width = self._segments(t)
        w = (t - left) / width
        lower = self._pick(values, idx, aligned)
        upper = self._pick(values, idx + 1, aligned)
        return lower * (1.0 - w) + upper * w

    def df(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        self._check_range(t)
        values, _, aligned = self._tables(t, where)
        idx, _, width = self._segments(t)
        return (self._pick(values, idx + 1, aligned) - self._pick(values, idx, aligned)) / width

    def _antiderivative(self, t: np.ndarray, where: Where, per_node: bool = False) -> np.ndarray:
        values, cumulative, aligned = self._tables(t, where, per_node=per_node)
        idx, left, width = self._segments(t)
        w = (t - left) / width
        v0 = self._pick(values, idx, aligned)
        v1 = self._pick(values, idx + 1, aligned)
        f_t = v0 * (1.0 - w) + v1 * w
        return self._pick(cumulative, idx, aligned) + 0.5 * (t - left) * (v0 + f_t)

    def F(self, t, where=None):
        t = np.asarray(t, dtype=np.float64)
        self._check_range(t)
        origin = self._origin
        if self.per_node and where is not None:
            origin = self._origin[where]
        return self._antiderivative(t, where) - origin

    def params(self):
        return {"t_grid": self.t_grid.tolist(), "values": self.values.tolist()}


KERNELS: Dict[str, Tuple[Callable[..., Kernel], Dict[str, Any]]] = {
    "linear": (LinearKernel, {"slope": 1.0}),
    "cubic_softening": (CubicSofteningKernel, {}),
    "power": (PowerKernel, {"s": 1.0, "gamma": 2.0}),
    "rational_quartic": (RationalQuarticKernel, {}),
    "damped_quadratic": (DampedQuadraticKernel, {}),
    "tabulated": (TabulatedKernel, {"t_grid": None, "values": None}),
}


def build_kernel(kind: str, params: Optional[Mapping[str, Any]] = None) -> Kernel:
    if kind not in KERNELS:
        raise UnknownKind(f"unknown nonlinearity kind '{kind}'; expected one of {sorted(KERNELS)}")
    factory, defaults = KERNELS[kind]
    return factory(**_take(params or {}, defaults))


def adaptive_simpson(
    func: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUADRATURE_TOL,
    max_depth: int = QUADRATURE_MAX_DEPTH,
) -> float:
    """Adaptive composite Simpson rule with an absolute tolerance."""
    if a == b:
        return 0.0
    fa, fb = func(a), func(b)
    mid = 0.5 * (a + b)
    fm = func(mid)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0

    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, estimate, eps, depth = stack.pop()
        centre = 0.5 * (lo + hi)
        left_mid = 0.5 * (lo + centre)
        right_mid = 0.5 * (centre + hi)
        fl, fr = func(left_mid), func(right_mid)
        left = (centre - lo) * (flo + 4.0 * fl + fmid) / 6.0
        right = (hi - centre) * (fmid + 4.0 * fr + fhi) / 6.0
        delta = left + right - estimate
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureNonconvergent(
                f"Simpson refinement exceeded depth {max_depth} on [{lo}, {hi}]"
            )
        stack.append((lo, centre, flo, fl, fmid, left, 0.5 * eps, depth + 1))
        stack.append((centre, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
    return total


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """f((i, j), t) = coefficient(i, j) * f_kind(t) with primitive F from 0."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    coefficient: Optional[np.ndarray] = None
    primitive_mode: str = "closed_form"
    kernel: Kernel = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.primitive_mode not in PRIMITIVE_MODES:
            raise InvalidParameter(
                f"primitive_mode must be one of {PRIMITIVE_MODES}, got '{self.primitive_mode}'",
                field="primitive_mode",
            )
        object.__setattr__(self, "kernel", build_kernel(self.kind, self.params))
        if self.coefficient is not None:
            table = np.array(self.coefficient, dtype=np.float64)
            if table.ndim != 2 or not np.all(np.isfinite(table)):
                raise InvalidParameter(
                    "coefficient must be a finite 2-D table", field="coefficient"
                )
            table.setflags(write=False)
            object.__setattr__(self, "coefficient", table)

    @property
    def node_table_shape(self) -> Optional[Tuple[int, int]]:
        if isinstance(self.kernel, TabulatedKernel):
            return self.kernel.node_shape
        return None

    @property
    def has_closed_derivative(self) -> bool:
        return type(self.kernel).df is not Kernel.df

    def describe(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind, "params": self.kernel.params()}
        if self.coefficient is not None:
            out["coefficient"] = self.coefficient.tolist()
        out["primitive_mode"] = self.primitive_mode
        return out

    def _scale(self, values: np.ndarray, where: Where) -> np.ndarray:
        if self.coefficient is None:
            return values
        if where is None:
            return self.coefficient * values
        return self.coefficient[where] * values

    def _check_node(self, node: Node) -> Tuple[int, int]:
        i, j = node
        shape = self.coefficient.shape if self.coefficient is not None else self.node_table_shape
        if i < 1 or j < 1 or (shape is not None and (i > shape[0] or j > shape[1])):
            raise IndexOutOfRange(f"node ({i}, {j}) outside the nonlinearity tables {shape}")
        return i - 1, j - 1

    def f_values(self, T: np.ndarray) -> np.ndarray:
        """f evaluated node-wise on an (m, n) array of arguments."""
        return self._scale(self.kernel.f(T, None), None)

    def df_values(self, T: np.ndarray) -> np.ndarray:
        T = np.asarray(T, dtype=np.float64)
        derivative = self.kernel.df(T, None)
        if derivative is None:
            h = FD_DERIVATIVE_STEP * (1.0 + np.abs(T))
            derivative = (self.kernel.f(T + h, None) - self.kernel.f(T - h, None)) / (2.0 * h)
        return self._scale(derivative, None)

    def F_values(self, T: np.ndarray) -> np.ndarray:
        T = np.asarray(T, dtype=np.float64)
        if self.primitive_mode == "closed_form":
            return self._scale(self.kernel.F(T, None), None)
        out = np.empty_like(T)
        per_node = self.node_table_shape is not None
        for index in np.ndindex(T.shape):
            where = index if per_node else None
            out[index] = self._quadrature(float(T[index]), where)
        return self._scale(out, None)

    def _quadrature(self, t: float, where: Where) -> float:
        kernel = self.kernel
        return adaptive_simpson(lambda x: float(kernel.f(np.float64(x), where)), 0.0, t)

    def node_f(self, node: Node, t: float) -> float:
        where = self._check_node(node)
        kernel_where = where if self.node_table_shape else None
        return float(self._scale(self.kernel.f(np.float64(t), kernel_where), where))

    def node_F(self, node: Node, t: float) -> float:
        where = self._check_node(node)
        kernel_where = where if self.node_table_shape else None
        if self.primitive_mode == "closed_form":
            value = self.kernel.F(np.float64(t), kernel_where)
        else:
            value = self._quadrature(float(t), kernel_where)
        return float(self._scale(value, where))

    def zero_values(self, shape: Tuple[int, int]) -> np.ndarray:
        """f(node, 0) on every node; nonzero entries mean U = 0 is not a solution."""
        return self.f_values(np.zeros(shape))


def eval_f(spec: NonlinearitySpec, node: Node, t: float) -> float:
    return spec.node_f(node, t)


def eval_F(spec: NonlinearitySpec, node: Node, t: float) -> float:
    return spec.node_F(node, t)


@dataclass(frozen=True)
class ConsistencyResult:
    max_error: float
    worst_node: Node
    worst_t: float
    samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def check_primitive_consistency(
    spec: NonlinearitySpec,
    shape: Tuple[int, int],
    rng: np.random.Generator,
    samples: int = 1000,
    t_scale: float = 3.0,
    tolerance: float = 1e-5,
) -> ConsistencyResult:
    """Compare the central difference of F against f at random (node, t) pairs.

    |t| is drawn from [1e-3, t_scale] with a random sign, away from the
    origin where power kernels with gamma < 2 lose their second derivative.
    """
    m, n = shape
    lo, hi = spec.kernel.argument_range()
    worst = (0.0, (1, 1), 0.0)
    for _ in range(samples):
        node = (int(rng.integers(1, m + 1)), int(rng.integers(1, n + 1)))
        t = float(rng.uniform(1e-3, t_scale)) * (1.0 if rng.random() < 0.5 else -1.0)
        h = 1e-5 * max(1.0, abs(t))
        t = min(max(t, lo + 2.0 * h), hi - 2.0 * h)
        estimate = (eval_F(spec, node, t + h) - eval_F(spec, node, t - h)) / (2.0 * h)
        error = abs(estimate - eval_f(spec, node, t))
        if error > worst[0]:
            worst = (error, node, t)
    return ConsistencyResult(
        max_error=worst[0],
        worst_node=worst[1],
        worst_t=worst[2],
        samples=samples,
        tolerance=tolerance,
    )
