"""Critical points of I_lambda: global and sublevel-constrained descent, mountain pass, Newton.

Every solver works on the flat (Fortran ordered) vector of a GridFunction and
returns a SolveReport whose residual is re-evaluated independently of the
iteration that produced it.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from ..errors import (
    BvpError,
    EmptySweep,
    EndpointNotBelowZero,
    InvalidParameter,
    MaxItersExceeded,
    SingularJacobian,
)
from .assembly import SystemMatrix, assemble_M, check_lambda
from .energy import EnergyBreakdown, energy, energy_value, gradient_vector
from .grid_problem import GridFunction, ProblemInstance
from .line_search import armijo_backtrack, maximize_on_interval
from .spectral import SpectrumSummary, eigen_extremes

logger = logging.getLogger(__name__)

METHODS = ("global_min", "sublevel_min", "mountain_pass", "newton")

MAX_NEWTON_FALLBACKS = 10
MAX_ENDPOINT_DOUBLINGS = 60
DIVERGENCE_BOUND = 1e100
ENERGY_TIE_TOL = 1e-10
# relative size of a Newton step that counts as a singular solve
NEWTON_STEP_LIMIT = 1e12
RAY_LEVELS = 8
MAX_PATH_GROWTH = 4
# mountain-pass energies below -SADDLE_ENERGY_SLACK * grad_tol are off the ridge
SADDLE_ENERGY_SLACK = 10.0

TraceRow = Tuple[int, float, float]


def _require_unit_interval(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise InvalidParameter(f"{name} must lie in (0, 1), got {value}", field=name)


def _require_positive(name: str, value: float) -> None:
    if not value > 0:
        raise InvalidParameter(f"{name} must be positive, got {value}", field=name)


@dataclass(frozen=True)
class SolveOptions:
    grad_tol: float = 1e-10
    max_iters: int = 100_000
    armijo_c: float = 1e-4
    backtrack_ratio: float = 0.5
    initial_step: float = 1.0
    nontrivial_tol: float = 1e-6
    seed: int = 0
    restarts: int = 5
    # descent hands over to Newton once the gradient is this small
    handoff_tol: float = 1e-6
    newton_max_iters: int = 100
    record_trace: bool = False

    def __post_init__(self) -> None:
        for name in ("grad_tol", "initial_step", "nontrivial_tol", "handoff_tol"):
            _require_positive(name, getattr(self, name))
        _require_unit_interval("armijo_c", self.armijo_c)
        _require_unit_interval("backtrack_ratio", self.backtrack_ratio)
        for name in ("max_iters", "newton_max_iters"):
            if int(getattr(self, name)) < 1:
                raise InvalidParameter(f"{name} must be at least 1", field=name)
        if int(self.restarts) < 0:
            raise InvalidParameter("restarts must be nonnegative", field="restarts")


@dataclass(frozen=True)
class SublevelOptions:
    alpha: float
    lambda_min: float
    shrink_eps: float = 1e-3

    def __post_init__(self) -> None:
        _require_positive("alpha", self.alpha)
        _require_positive("lambda_min", self.lambda_min)
        _require_unit_interval("shrink_eps", self.shrink_eps)

    @classmethod
    def from_spectrum(
        cls, alpha: float, spectrum: SpectrumSummary, shrink_eps: float = 1e-3
    ) -> "SublevelOptions":
        return cls(alpha=alpha, lambda_min=spectrum.lambda_min, shrink_eps=shrink_eps)

    @property
    def r(self) -> float:
        return 0.5 * self.lambda_min * self.alpha**2


@dataclass(frozen=True, eq=False)
class MountainPassOptions:
    endpoint: Optional[GridFunction] = None
    path_points: int = 64
    deform_steps: int = 10_000
    grad_tol: Optional[float] = None
    seed: Optional[int] = None
    reparam_every: int = 25

    def __post_init__(self) -> None:
        if int(self.path_points) < 3:
            raise InvalidParameter("path_points must be at least 3", field="path_points")
        if int(self.deform_steps) < 1:
            raise InvalidParameter("deform_steps must be at least 1", field="deform_steps")
        if int(self.reparam_every) < 1:
            raise InvalidParameter("reparam_every must be at least 1", field="reparam_every")
        if self.grad_tol is not None:
            _require_positive("grad_tol", self.grad_tol)


@dataclass(frozen=True, eq=False)
class SolveReport:
    U: GridFunction
    method: str
    lam: float
    residual_inf: float
    energy: EnergyBreakdown
    iterations: int
    converged: bool
    nontrivial: bool
    trace: Optional[Tuple[TraceRow, ...]] = None
    extras: Mapping[str, Any] = field(default_factory=dict)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.U.values)))

    def raise_for_convergence(self) -> None:
        if not self.converged:
            raise MaxItersExceeded(
                f"{self.method} stopped after {self.iterations} iterations "
                f"with residual {self.residual_inf:.3e}",
                report=self,
            )


class _Problem:
    """Instance, matrix and lambda bound together for the flat-vector hot paths."""

    def __init__(self, instance: ProblemInstance, lam: float, M: Optional[SystemMatrix] = None):
        self.instance = instance
        self.lam = lam
        self.M = M if M is not None else assemble_M(instance.grid)

    @property
    def size(self) -> int:
        return self.instance.size

    def value(self, x: np.ndarray) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            return energy_value(self.instance, self.M, x, self.lam)

    def grad(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return gradient_vector(self.instance, self.M, x, self.lam)

    def phi(self, x: np.ndarray) -> float:
        return 0.5 * self.M.quadratic_form(x)

    def grid_function(self, x: np.ndarray) -> GridFunction:
        return GridFunction.from_flat(self.instance.m, self.instance.n, x)

    def report(
        self,
        x: np.ndarray,
        method: str,
        iterations: int,
        opts: SolveOptions,
        trace: Optional[List[TraceRow]] = None,
        extras: Optional[Dict[str, Any]] = None,
    ) -> SolveReport:
        U = self.grid_function(x)
        residual_inf = float(np.max(np.abs(self.grad(x))))
        converged = bool(np.isfinite(residual_inf) and residual_inf <= opts.grad_tol)
        return SolveReport(
            U=U,
            method=method,
            lam=self.lam,
            residual_inf=residual_inf,
            energy=energy(self.instance, self.M, U, self.lam),
            iterations=iterations,
            converged=converged,
            nontrivial=bool(np.max(np.abs(x)) > opts.nontrivial_tol),
            trace=tuple(trace) if trace is not None else None,
            extras=dict(extras or {}),
        )


@dataclass
class _DescentRun:
    x: np.ndarray
    value: float
    grad_inf: float
    iterations: int
    diverged: bool = False
    stalled: bool = False


def _descend(
    problem: _Problem,
    x0: np.ndarray,
    opts: SolveOptions,
    stop_tol: float,
    max_iters: int,
    project=None,
    trace: Optional[List[TraceRow]] = None,
    offset: int = 0,
) -> _DescentRun:
    """Gradient descent with Armijo backtracking, optionally projected."""
    x = project(x0) if project is not None else np.array(x0, dtype=np.float64)
    value = problem.value(x)
    step = opts.initial_step
    grad_inf = np.inf
    for it in range(max_iters):
        g = problem.grad(x)
        grad_inf = float(np.max(np.abs(g)))
        if trace is not None:
            trace.append((offset + it, value, grad_inf))
        if grad_inf <= stop_tol:
            return _DescentRun(x, value, grad_inf, it)
        if not np.isfinite(value) or np.max(np.abs(x)) > DIVERGENCE_BOUND:
            logger.info(f"Descent diverged after {it} iterations")
            return _DescentRun(x, value, grad_inf, it, diverged=True)
        result = armijo_backtrack(
            problem.value,
            x,
            value,
            g,
            initial_step=min(opts.initial_step, 2.0 * step),
            c=opts.armijo_c,
            ratio=opts.backtrack_ratio,
            project=project,
        )
        if not result.accepted:
            logger.debug(f"Line search stalled at iteration {it}, gradient {grad_inf:.3e}")
            return _DescentRun(x, value, grad_inf, it, stalled=True)
        x, value, step = result.x, result.value, result.step
        logger.debug(f"iteration {offset + it}: energy={value:.12g} gradient={grad_inf:.3e}")
    return _DescentRun(x, value, grad_inf, max_iters)


def _newton_steps(
    problem: _Problem, x0: np.ndarray, opts: SolveOptions, trace: Optional[List[TraceRow]] = None
) -> Tuple[np.ndarray, int, int]:
    """Damped Newton on R(U) = MU - lambda H(U); returns (x, iterations, fallbacks)."""
    instance, M, lam = problem.instance, problem.M, problem.lam
    w = M.bandwidth
    x = np.array(x0, dtype=np.float64)
    R = problem.grad(x)
    rnorm = float(np.max(np.abs(R)))
    fallbacks = 0
    iterations = 0

    for iterations in range(opts.newton_max_iters + 1):
        if trace is not None:
            trace.append((iterations, problem.value(x), rnorm))
        if rnorm <= opts.grad_tol or iterations == opts.newton_max_iters:
            break

        values = np.reshape(x, (instance.m, instance.n), order="F")
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            slope = instance.nonlinearity.df_values(values).flatten(order="F")
        delta = None
        if np.all(np.isfinite(slope)):
            try:
                delta = solve_banded((w, w), M.general_band(-lam * slope), -R)
            except (LinAlgError, ValueError):
                delta = None
        if delta is not None and (
            not np.all(np.isfinite(delta))
            or np.max(np.abs(delta)) > NEWTON_STEP_LIMIT * (1.0 + np.max(np.abs(x)))
        ):
            delta = None

        accepted = False
        if delta is not None:
            step = 1.0
            while step > 1e-10:
                candidate = x + step * delta
                r_candidate = problem.grad(candidate)
                norm_candidate = float(np.max(np.abs(r_candidate)))
                if np.isfinite(norm_candidate) and norm_candidate < rnorm:
                    x, R, rnorm = candidate, r_candidate, norm_candidate
                    accepted = True
                    break
                step *= 0.5

        if accepted:
            continue

        fallbacks += 1
        if fallbacks > MAX_NEWTON_FALLBACKS:
            raise SingularJacobian(
                f"Newton Jacobian singular or step rejected {fallbacks} times "
                f"(residual {rnorm:.3e})"
            )
        logger.warning(f"Newton step failed at iteration {iterations}; taking a gradient step")
        result = armijo_backtrack(
            problem.value,
            x,
            problem.value(x),
            R,
            initial_step=opts.initial_step,
            c=opts.armijo_c,
            ratio=opts.backtrack_ratio,
        )
        if result.accepted:
            x = result.x
            R = problem.grad(x)
            rnorm = float(np.max(np.abs(R)))

    return x, iterations, fallbacks


def newton_refine(
    instance: ProblemInstance,
    lam: float,
    U0: GridFunction,
    opts: Optional[SolveOptions] = None,
    M: Optional[SystemMatrix] = None,
) -> SolveReport:
    opts = opts or SolveOptions()
    lam = check_lambda(lam)
    instance.check_shape(U0)
    problem = _Problem(instance, lam, M)
    trace: Optional[List[TraceRow]] = [] if opts.record_trace else None
    x, iterations, fallbacks = _newton_steps(problem, U0.flat, opts, trace)
    report = problem.report(x, "newton", iterations, opts, trace, {"fallbacks": fallbacks})
    if not report.converged:
        logger.warning(f"Newton ended unconverged, residual {report.residual_inf:.3e}")
    return report


def _refine_candidate(
    problem: _Problem,
    run: _DescentRun,
    opts: SolveOptions,
    project=None,
    admissible=None,
    trace: Optional[List[TraceRow]] = None,
) -> Tuple[np.ndarray, int, bool]:
    """Newton polish of a descent result, kept only when it does not climb.

    Falls back to continued descent down to grad_tol otherwise.
    """
    if run.diverged or run.grad_inf <= opts.grad_tol:
        return run.x, 0, False
    try:
        x, iterations, _ = _newton_steps(problem, run.x, opts)
        value = problem.value(x)
        keep = (
            np.isfinite(value)
            and value <= run.value + 1e-12 * (1.0 + abs(run.value))
            and float(np.max(np.abs(problem.grad(x)))) <= opts.grad_tol
        )
        if keep and admissible is not None:
            keep = admissible(x)
        if keep:
            return x, iterations, True
    except SingularJacobian:
        logger.info("Newton polish failed; continuing descent")
    remaining = max(opts.max_iters - run.iterations, 1)
    more = _descend(
        problem, run.x, opts, opts.grad_tol, remaining, project, trace, offset=run.iterations
    )
    return more.x, more.iterations, False


def minimize_global(
    instance: ProblemInstance,
    lam: float,
    opts: Optional[SolveOptions] = None,
    warm_start: Optional[GridFunction] = None,
    M: Optional[SystemMatrix] = None,
) -> SolveReport:
    """Armijo descent from 0, an optional warm start and seeded random points in [-2, 2]."""
    opts = opts or SolveOptions()
    lam = check_lambda(lam)
    problem = _Problem(instance, lam, M)
    rng = np.random.default_rng(opts.seed)

    starts: List[Tuple[str, np.ndarray]] = [("zero", np.zeros(problem.size))]
    if warm_start is not None:
        instance.check_shape(warm_start)
        starts.append(("warm", warm_start.flat))
    for k in range(opts.restarts):
        starts.append((f"random{k}", rng.uniform(-2.0, 2.0, size=problem.size)))

    best: Optional[SolveReport] = None
    for label, x0 in starts:
        trace: Optional[List[TraceRow]] = [] if opts.record_trace else None
        run = _descend(problem, x0, opts, opts.handoff_tol, opts.max_iters, trace=trace)
        x, newton_iterations, polished = _refine_candidate(problem, run, opts, trace=trace)
        report = problem.report(
            x,
            "global_min",
            run.iterations + newton_iterations,
            opts,
            trace,
            {"start": label, "newton_polished": polished, "diverged": run.diverged},
        )
        logger.info(
            f"global_min start {label}: energy={report.energy.total:.12g} "
            f"residual={report.residual_inf:.3e} iterations={report.iterations}"
        )
        if best is None or _better(report, best):
            best = report

    best = _with_extras(best, restarts=len(starts))
    if not best.converged:
        logger.warning(f"global_min ended unconverged, residual {best.residual_inf:.3e}")
    return best


def _better(candidate: SolveReport, incumbent: SolveReport) -> bool:
    """Lower energy wins; convergence only breaks ties between equal energies."""
    e_c, e_i = candidate.energy.total, incumbent.energy.total
    if not np.isfinite(e_c):
        return False
    if not np.isfinite(e_i):
        return True
    if abs(e_c - e_i) <= ENERGY_TIE_TOL * (1.0 + abs(e_i)):
        return candidate.converged and not incumbent.converged
    return e_c < e_i


def _with_extras(report: SolveReport, **extras: Any) -> SolveReport:
    merged = dict(report.extras)
    merged.update(extras)
    return SolveReport(
        U=report.U,
        method=report.method,
        lam=report.lam,
        residual_inf=report.residual_inf,
        energy=report.energy,
        iterations=report.iterations,
        converged=report.converged,
        nontrivial=report.nontrivial,
        trace=report.trace,
        extras=merged,
    )


def minimize_sublevel(
    instance: ProblemInstance,
    lam: float,
    sub: SublevelOptions,
    opts: Optional[SolveOptions] = None,
    warm_start: Optional[GridFunction] = None,
    M: Optional[SystemMatrix] = None,
) -> SolveReport:
    """Projected descent inside the ellipsoid phi(U) < r, r = lambda_1 alpha^2 / 2."""
    opts = opts or SolveOptions()
    lam = check_lambda(lam, allow_zero=True)
    problem = _Problem(instance, lam, M)
    r = sub.r
    ceiling = r * (1.0 - sub.shrink_eps)

    def project(x: np.ndarray) -> np.ndarray:
        level = problem.phi(x)
        if level >= r:
            return x * np.sqrt(ceiling / level)
        return x

    def inside(x: np.ndarray) -> bool:
        return problem.phi(x) < r

    rng = np.random.default_rng(opts.seed)
    ones = np.ones(problem.size)
    scale = np.sqrt(ceiling / problem.phi(ones))
    ray = [scale * 2.0**-k * ones for k in range(RAY_LEVELS)]
    ray_start = min(ray, key=problem.value)

    starts: List[Tuple[str, np.ndarray]] = [("zero", np.zeros(problem.size)), ("ray", ray_start)]
    if warm_start is not None:
        instance.check_shape(warm_start)
        starts.append(("warm", warm_start.flat))
    for k in range(opts.restarts):
        starts.append((f"random{k}", rng.uniform(-2.0, 2.0, size=problem.size)))

    best: Optional[SolveReport] = None
    for label, x0 in starts:
        trace: Optional[List[TraceRow]] = [] if opts.record_trace else None
        run = _descend(problem, x0, opts, opts.handoff_tol, opts.max_iters, project, trace)
        x, newton_iterations, polished = _refine_candidate(
            problem, run, opts, project=project, admissible=inside, trace=trace
        )
        inside_set = inside(x)
        report = problem.report(
            x,
            "sublevel_min",
            run.iterations + newton_iterations,
            opts,
            trace,
            {
                "start": label,
                "r": r,
                "phi": problem.phi(x),
                "inside_sublevel": inside_set,
                "newton_polished": polished,
            },
        )
        logger.info(
            f"sublevel_min start {label}: energy={report.energy.total:.12g} "
            f"residual={report.residual_inf:.3e} inside={inside_set}"
        )
        if not inside_set:
            continue
        if best is None or _better(report, best):
            best = report

    if best is None:
        # projection keeps every iterate inside; only reachable through rounding at the boundary
        x = project(np.zeros(problem.size))
        best = problem.report(x, "sublevel_min", 0, opts, None, {"r": r, "inside_sublevel": True})
    best = _with_extras(best, restarts=len(starts))
    if not best.converged:
        logger.warning(f"sublevel_min ended unconverged, residual {best.residual_inf:.3e}")
    return best


def find_negative_endpoint(
    instance: ProblemInstance,
    lam: float,
    seed: int = 0,
    M: Optional[SystemMatrix] = None,
    direction: Optional[GridFunction] = None,
    max_doublings: int = MAX_ENDPOINT_DOUBLINGS,
) -> GridFunction:
    """t * V with t doubled from 1 until I_lambda(t V) < 0."""
    lam = check_lambda(lam)
    problem = _Problem(instance, lam, M)
    if direction is None:
        v = np.random.default_rng(seed).standard_normal(problem.size)
    else:
        instance.check_shape(direction)
        v = direction.flat
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise InvalidParameter("endpoint direction must be nonzero", field="direction")
    v = v / norm
    t = 1.0
    for _ in range(max_doublings + 1):
        value = problem.value(t * v)
        if value < 0:
            logger.info(f"Negative energy {value:.6g} reached at t={t:g}")
            return problem.grid_function(t * v)
        t *= 2.0
    raise EndpointNotBelowZero(
        f"energy along the direction stayed nonnegative after {max_doublings} doublings"
    )


def _respace(path: np.ndarray) -> np.ndarray:
    lengths = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cumulative[-1]
    if total == 0.0:
        return path
    targets = np.linspace(0.0, total, path.shape[0])
    idx = np.clip(np.searchsorted(cumulative, targets, side="right") - 1, 0, path.shape[0] - 2)
    span = cumulative[idx + 1] - cumulative[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        weight = np.where(span > 0, (targets - cumulative[idx]) / span, 0.0)
    out = path[idx] * (1.0 - weight)[:, None] + path[idx + 1] * weight[:, None]
    out[0], out[-1] = path[0], path[-1]
    return out


def _reparametrize(path: np.ndarray, pin: Optional[int] = None) -> np.ndarray:
    """Re-space path states evenly by arc length; endpoints and state ``pin`` stay fixed."""
    if pin is None or not 0 < pin < path.shape[0] - 1:
        return _respace(path)
    return np.concatenate([_respace(path[: pin + 1]), _respace(path[pin:])[1:]])


def _refine_ridge(
    problem: _Problem, path: np.ndarray, k: int, limit: int
) -> Tuple[np.ndarray, int, int]:
    """Insert a state on each segment next to ``k`` whose interior rises above both ends.

    Returns the path, the new index of state ``k`` and the number of insertions.
    """
    inserted = 0
    for a in (k, k - 1):
        if path.shape[0] >= limit:
            break
        lo, hi = path[a], path[a + 1]
        ends = max(problem.value(lo), problem.value(hi))
        if not problem.value(0.5 * (lo + hi)) > ends:
            continue
        s, _ = maximize_on_interval(lambda s: problem.value(lo + s * (hi - lo)), 0.0, 1.0)
        path = np.insert(path, a + 1, lo + s * (hi - lo), axis=0)
        inserted += 1
        if a < k:
            k += 1
    return path, k, inserted


def mountain_pass(
    instance: ProblemInstance,
    lam: float,
    mp: Optional[MountainPassOptions] = None,
    opts: Optional[SolveOptions] = None,
    M: Optional[SystemMatrix] = None,
) -> SolveReport:
    """Deform the segment 0 -> endpoint by pushing its energy maximum downhill.

    The maximum is first moved to the local maximiser along the polyline, then
    descends along the gradient component orthogonal to the path. A step never
    moves the state by more than a quarter of the distance between its
    neighbours, and a state is inserted wherever an adjacent segment rises
    above both of its ends, so the polyline keeps crossing the ridge. The path
    is re-spaced by arc length every ``reparam_every`` deformations with the
    maximum held fixed, and the final maximum is polished by Newton.

    The report is only marked converged for a nontrivial critical point with
    energy at least ``-10 * grad_tol`` reached from a path whose maximum
    stayed positive.
    """
    opts = opts or SolveOptions()
    mp = mp or MountainPassOptions()
    lam = check_lambda(lam)
    problem = _Problem(instance, lam, M)
    seed = opts.seed if mp.seed is None else mp.seed
    grad_tol = opts.grad_tol if mp.grad_tol is None else mp.grad_tol

    endpoint = mp.endpoint
    if endpoint is None:
        endpoint = find_negative_endpoint(instance, lam, seed=seed, M=problem.M)
    instance.check_shape(endpoint)
    end = endpoint.flat
    end_value = problem.value(end)
    if not end_value < 0:
        raise EndpointNotBelowZero(f"I_lambda(endpoint) = {end_value:.6g} is not negative")

    points = int(mp.path_points)
    limit = MAX_PATH_GROWTH * points
    path = np.linspace(0.0, 1.0, points)[:, None] * end[None, :]
    stop = max(grad_tol, opts.handoff_tol)
    trace: Optional[List[TraceRow]] = [] if opts.record_trace else None
    step = opts.initial_step
    grad_inf = np.inf
    deformations = 0
    insertions = 0

    for deformations in range(int(mp.deform_steps)):
        energies = np.array([problem.value(state) for state in path[1:-1]])
        k = int(np.argmax(energies)) + 1

        def along(s: float, k: int = k) -> np.ndarray:
            if s < 0:
                return path[k] + s * (path[k] - path[k - 1])
            return path[k] + s * (path[k + 1] - path[k])

        s_best, _ = maximize_on_interval(lambda s: problem.value(along(s)), -1.0, 1.0)
        path[k] = along(s_best)
        x = path[k]
        value = problem.value(x)
        g = problem.grad(x)
        grad_inf = float(np.max(np.abs(g)))
        if trace is not None:
            trace.append((deformations, value, grad_inf))
        if grad_inf <= stop:
            break

        tangent = path[k + 1] - path[k - 1]
        tnorm = float(np.linalg.norm(tangent))
        direction = -g
        if tnorm > 0:
            tangent = tangent / tnorm
            direction = direction + float(g @ tangent) * tangent
        dnorm = float(np.linalg.norm(direction))
        if dnorm == 0.0:
            logger.debug("Path maximum has no transverse descent direction")
            break
        initial_step = min(opts.initial_step, 2.0 * step)
        if tnorm > 0:
            initial_step = min(initial_step, 0.25 * tnorm / dnorm)
        result = armijo_backtrack(
            problem.value,
            x,
            value,
            g,
            direction=direction,
            initial_step=initial_step,
            c=opts.armijo_c,
            ratio=opts.backtrack_ratio,
        )
        if not result.accepted:
            logger.debug(f"Deformation stalled at step {deformations}")
            break
        path[k] = result.x
        step = result.step
        path, k, added = _refine_ridge(problem, path, k, limit)
        insertions += added
        if (deformations + 1) % mp.reparam_every == 0:
            path = _reparametrize(path, pin=k)

    energies = np.array([problem.value(state) for state in path[1:-1]])
    top = int(np.argmax(energies)) + 1
    x_path = path[top].copy()
    path_max = float(energies[top - 1])
    logger.info(
        f"mountain_pass deformed {deformations} times; path maximum {path_max:.12g}, "
        f"gradient {grad_inf:.3e}, {path.shape[0]} states"
    )

    floor = -SADDLE_ENERGY_SLACK * grad_tol
    x = x_path
    newton_iterations = 0
    fallbacks = 0
    try:
        x, newton_iterations, fallbacks = _newton_steps(problem, x_path.copy(), opts)
    except SingularJacobian:
        logger.warning("Newton polish of the path maximum failed")
    if not (np.max(np.abs(x)) > opts.nontrivial_tol and problem.value(x) >= floor):
        logger.warning("Newton polish left the ridge; keeping the path maximum")
        x = x_path
    report = problem.report(
        x,
        "mountain_pass",
        deformations + newton_iterations,
        opts,
        trace,
        {
            "path_max_energy": path_max,
            "deformations": deformations,
            "path_states": int(path.shape[0]),
            "ridge_insertions": insertions,
            "newton_iterations": newton_iterations,
            "newton_fallbacks": fallbacks,
            "endpoint_energy": end_value,
        },
    )
    saddle = path_max > 0 and report.nontrivial and report.energy.total >= floor
    if report.converged and not saddle:
        logger.warning(
            f"mountain_pass reached a critical point off the ridge: energy "
            f"{report.energy.total:.6g}, path maximum {path_max:.6g}"
        )
        report = replace(report, converged=False)
    if not report.converged:
        logger.warning(f"mountain_pass ended unconverged, residual {report.residual_inf:.3e}")
    return report


def solve(
    instance: ProblemInstance,
    lam: float,
    method: str = "global_min",
    opts: Optional[SolveOptions] = None,
    alpha: Optional[float] = None,
    spectrum: Optional[SpectrumSummary] = None,
    endpoint: Optional[GridFunction] = None,
    warm_start: Optional[GridFunction] = None,
    mp: Optional[MountainPassOptions] = None,
    M: Optional[SystemMatrix] = None,
    eigensolver: str = "jacobi",
) -> SolveReport:
    """Run one of METHODS; the newton method starts from ``warm_start`` (default U = 1)."""
    opts = opts or SolveOptions()
    if method not in METHODS:
        raise InvalidParameter(f"method must be one of {METHODS}, got '{method}'", field="method")
    M = M if M is not None else assemble_M(instance.grid)

    if method == "global_min":
        return minimize_global(instance, lam, opts, warm_start=warm_start, M=M)
    if method == "sublevel_min":
        if alpha is None:
            raise InvalidParameter("the sublevel method needs alpha", field="alpha")
        spectrum = spectrum or eigen_extremes(M, method=eigensolver, keep_spectrum=False)
        sub = SublevelOptions.from_spectrum(alpha, spectrum)
        return minimize_sublevel(instance, lam, sub, opts, warm_start=warm_start, M=M)
    if method == "mountain_pass":
        mp = mp or MountainPassOptions()
        if endpoint is not None:
            mp = MountainPassOptions(
                endpoint=endpoint,
                path_points=mp.path_points,
                deform_steps=mp.deform_steps,
                grad_tol=mp.grad_tol,
                seed=mp.seed,
                reparam_every=mp.reparam_every,
            )
        return mountain_pass(instance, lam, mp, opts, M=M)
    start = warm_start
    if start is None:
        start = GridFunction.constant(instance.m, instance.n, 1.0)
    return newton_refine(instance, lam, start, opts, M=M)


@dataclass(frozen=True, eq=False)
class SweepEntry:
    lam: float
    report: Optional[SolveReport]
    error: Optional[str] = None


def sweep_lambda(
    instance: ProblemInstance,
    lambdas: Sequence[float],
    method: str = "global_min",
    opts: Optional[SolveOptions] = None,
    threads: int = 1,
    **solve_kwargs: Any,
) -> List[SweepEntry]:
    """Solve for each lambda in ascending order.

    Sequential sweeps warm-start from the last nontrivial solution; with
    ``threads > 1`` the solves are cold and run concurrently, results kept in
    lambda order. Library errors are recorded per entry.
    """
    if len(lambdas) == 0:
        raise EmptySweep("lambda sweep needs at least one value")
    values = [check_lambda(lam) for lam in lambdas]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidParameter("sweep lambdas must be strictly ascending", field="lambdas")
    opts = opts or SolveOptions()
    M = assemble_M(instance.grid)
    if method == "sublevel_min" and solve_kwargs.get("spectrum") is None:
        eigensolver = solve_kwargs.get("eigensolver", "jacobi")
        solve_kwargs["spectrum"] = eigen_extremes(M, method=eigensolver, keep_spectrum=False)

    def run(lam: float, warm: Optional[GridFunction]) -> SweepEntry:
        try:
            report = solve(instance, lam, method, opts, warm_start=warm, M=M, **solve_kwargs)
        except BvpError as e:
            logger.error(f"Sweep entry lambda={lam} failed: {e}")
            return SweepEntry(lam=lam, report=None, error=f"{type(e).__name__}: {e}")
        return SweepEntry(lam=lam, report=report)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda lam: run(lam, None), values))

    entries: List[SweepEntry] = []
    warm: Optional[GridFunction] = None
    for lam in values:
        entry = run(lam, warm)
        if entry.report is not None and entry.report.nontrivial and entry.report.converged:
            warm = entry.report.U
        entries.append(entry)
    return entries
