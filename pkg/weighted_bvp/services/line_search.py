"""Step-length rules shared by the descent solvers."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 60

Projection = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class StepResult:
    x: np.ndarray
    value: float
    step: float
    accepted: bool
    trials: int


def armijo_backtrack(
    func: Callable[[np.ndarray], float],
    x: np.ndarray,
    value: float,
    grad: np.ndarray,
    direction: Optional[np.ndarray] = None,
    initial_step: float = 1.0,
    c: float = 1e-4,
    ratio: float = 0.5,
    project: Optional[Projection] = None,
    max_trials: int = MAX_BACKTRACKS,
) -> StepResult:
    """Backtrack along ``direction`` (default -grad) until sufficient decrease.

    Acceptance is func(y) <= value + c * grad'(y - x) with y the (projected)
    trial point, which reduces to the classical rule when no projection is
    given. Non-finite trial values are rejected.
    """
    d = -grad if direction is None else direction
    step = initial_step
    for trial in range(1, max_trials + 1):
        y = x + step * d
        if project is not None:
            y = project(y)
        candidate = func(y)
        if np.isfinite(candidate) and candidate <= value + c * float(grad @ (y - x)):
            return StepResult(x=y, value=float(candidate), step=step, accepted=True, trials=trial)
        step *= ratio
    return StepResult(x=x, value=value, step=step, accepted=False, trials=max_trials)


def maximize_on_interval(
    func: Callable[[float], float], a: float, b: float, xtol: float = 1e-10
) -> Tuple[float, float]:
    """Bounded Brent search for a maximiser of a scalar function on [a, b]."""
    if not a < b:
        value = func(a)
        return a, value
    result = minimize_scalar(
        lambda t: -func(t), bounds=(a, b), method="bounded", options={"xatol": xtol}
    )
    t = float(result.x)
    value = float(-result.fun)
    # the bounded method never evaluates the endpoints
    for end in (a, b):
        end_value = func(end)
        if end_value > value:
            t, value = end, end_value
    return t, value
