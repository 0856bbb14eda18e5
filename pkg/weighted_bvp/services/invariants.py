"""Executable invariants of every module, run against one problem instance.

`run_invariants` returns one row per check (check, module, status, detail) as a
pandas DataFrame. A status is ``pass``, ``fail`` or ``skip``; a check skips
when the instance lies outside the regime its invariant speaks about, and a
check that raises a library error fails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import BvpError, EndpointNotBelowZero, NonpositiveDenominator
from .assembly import SystemMatrix, apply_stencil, assemble_M
from .energy import (
    check_bounds,
    energy,
    energy_value,
    euclidean_norm,
    gradient_vector,
    max_norm,
    phi,
    psi,
)
from .grid_problem import (
    GridFunction,
    ProblemInstance,
    flatten_index,
    unflatten_index,
)
from .nonlinearity import check_primitive_consistency
from .regimes import (
    HypothesisParams,
    coercivity_profile,
    sphere_energy_floor,
    sublevel_ratio_bound,
    threshold_lambda_star,
    thresholds,
)
from .solvers import (
    SADDLE_ENERGY_SLACK,
    MountainPassOptions,
    SolveOptions,
    SublevelOptions,
    find_negative_endpoint,
    minimize_global,
    minimize_sublevel,
    mountain_pass,
    sweep_lambda,
)
from .spectral import SpectrumSummary, eigen_extremes, quadratic_form_lower_bound_check

logger = logging.getLogger(__name__)

PASS, FAIL, SKIP = "pass", "fail", "skip"
STATUSES = (PASS, FAIL, SKIP)

SCALE_FACTOR = 2.5
FD_TOL = 1e-6
RAYLEIGH_SLACK = 1e-9
# far enough out that the leading growth term of I_lambda dominates
FAR_RADII = (1e2, 1e3, 1e4)
COERCIVE_RADII = (8.0, 64.0, 512.0)
LOCAL_MIN_RADIUS = 1e-2


@dataclass
class VerifyContext:
    instance: ProblemInstance
    M: SystemMatrix
    spectrum: SpectrumSummary
    lam: float
    params: Optional[HypothesisParams]
    rng: np.random.Generator
    samples: int
    eigensolver: str

    def random_field(self, scale: float = 2.0) -> GridFunction:
        m, n = self.instance.m, self.instance.n
        return GridFunction.from_values(self.rng.uniform(-scale, scale, size=(m, n)))

    def seed(self) -> int:
        return int(self.rng.integers(0, 2**31))


CheckOutcome = Tuple[str, str]


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _energies(profile: Sequence[Tuple[float, float]]) -> str:
    return ", ".join(f"{e:.3g}" for _, e in profile)


def _flattening(ctx: VerifyContext) -> CheckOutcome:
    m, n = ctx.instance.m, ctx.instance.n
    for k in range(1, m * n + 1):
        i, j = unflatten_index(k, m, n)
        if flatten_index(i, j, m, n) != k:
            return FAIL, f"index {k} maps to ({i}, {j}) and back to a different index"
    return PASS, f"{m * n} indices round-trip"


def _symmetry(ctx: VerifyContext) -> CheckOutcome:
    dense = ctx.M.to_dense()
    gap = float(np.max(np.abs(dense - dense.T)))
    return _verdict(gap == 0.0), f"max |M - M'| = {gap:.3e}"


def _stencil_matches_matrix(ctx: VerifyContext) -> CheckOutcome:
    worst = 0.0
    for _ in range(ctx.samples):
        U = ctx.random_field()
        direct = apply_stencil(ctx.instance.grid, U).flat
        product = ctx.M.matvec(U.flat)
        scale = max(1.0, float(np.max(np.abs(product))))
        worst = max(worst, float(np.max(np.abs(direct - product))) / scale)
    return _verdict(worst <= 1e-12), f"max relative gap {worst:.3e}"


def _positive_definite(ctx: VerifyContext) -> CheckOutcome:
    certified = ctx.spectrum.pd_certificate.positive_definite
    agrees = certified == (ctx.spectrum.lambda_min > 0)
    return _verdict(certified and agrees), (
        f"Cholesky certificate {certified}, lambda_min = {ctx.spectrum.lambda_min:.12g}"
    )


def _eigensolvers_agree(ctx: VerifyContext) -> CheckOutcome:
    other = "banded" if ctx.eigensolver == "jacobi" else "jacobi"
    second = eigen_extremes(ctx.M, method=other)
    gap = float(
        np.max(np.abs(np.array(ctx.spectrum.full_spectrum) - np.array(second.full_spectrum)))
    )
    tol = 1e-10 * max(1.0, ctx.M.frobenius_norm())
    return _verdict(gap <= tol), f"{ctx.eigensolver} vs {other}: max gap {gap:.3e}"


def _rayleigh_bounds(ctx: VerifyContext) -> CheckOutcome:
    lo, hi = ctx.spectrum.lambda_min, ctx.spectrum.lambda_max
    slack = RAYLEIGH_SLACK * hi
    for _ in range(ctx.samples):
        x = ctx.random_field().flat
        norm2 = float(x @ x)
        if norm2 == 0.0:
            continue
        quotient = ctx.M.quadratic_form(x) / norm2
        if not lo - slack <= quotient <= hi + slack:
            return FAIL, f"X'MX / X'X = {quotient:.12g} outside [{lo:.12g}, {hi:.12g}]"
    return PASS, f"{ctx.samples} random fields within [{lo:.6g}, {hi:.6g}]"


def _quadratic_lower_bound(ctx: VerifyContext) -> CheckOutcome:
    for _ in range(ctx.samples):
        X = ctx.random_field()
        check = quadratic_form_lower_bound_check(ctx.instance.grid, X)
        if not check.holds:
            return FAIL, f"X'MX = {check.lhs:.12g} below bound {check.rhs:.12g}"
    return PASS, f"{ctx.samples} random fields"


def _energy_bounds(ctx: VerifyContext) -> CheckOutcome:
    for _ in range(ctx.samples):
        U = ctx.random_field()
        report = check_bounds(ctx.M, ctx.spectrum, U)
        if not report.holds:
            return FAIL, f"bounds fail: {report}"
        if max_norm(U) > euclidean_norm(U):
            return FAIL, "max norm exceeds Euclidean norm"
    return PASS, f"{ctx.samples} random fields"


def _energy_identity(ctx: VerifyContext) -> CheckOutcome:
    U = ctx.random_field(1.0)
    breakdown = energy(ctx.instance, ctx.M, U, ctx.lam)
    expected = phi(ctx.M, U) - ctx.lam * psi(ctx.instance, U)
    return _verdict(breakdown.total == expected), f"total {breakdown.total!r} vs {expected!r}"


def _gradient_consistency(ctx: VerifyContext) -> CheckOutcome:
    worst = 0.0
    for _ in range(ctx.samples):
        x = ctx.random_field(1.5).flat
        g = gradient_vector(ctx.instance, ctx.M, x, ctx.lam)
        h = 1e-6 * (1.0 + float(np.max(np.abs(x))))
        for _ in range(5):
            d = ctx.rng.standard_normal(x.size)
            d /= np.linalg.norm(d)
            plus = energy_value(ctx.instance, ctx.M, x + h * d, ctx.lam)
            minus = energy_value(ctx.instance, ctx.M, x - h * d, ctx.lam)
            estimate = (plus - minus) / (2.0 * h)
            exact = float(g @ d)
            worst = max(worst, abs(estimate - exact) / max(1.0, abs(exact)))
    return _verdict(worst <= FD_TOL), f"max relative error {worst:.3e}"


def _primitive_consistency(ctx: VerifyContext) -> CheckOutcome:
    result = check_primitive_consistency(
        ctx.instance.nonlinearity, (ctx.instance.m, ctx.instance.n), ctx.rng, samples=200
    )
    return _verdict(result.passed), (
        f"max |F' - f| = {result.max_error:.3e} at node {result.worst_node}, t={result.worst_t:.6g}"
    )


def _unbounded_along(ctx: VerifyContext, direction: np.ndarray) -> Optional[str]:
    """Profile energies when I_lambda falls without bound along ``direction``, else None."""
    if not np.all(np.isfinite(direction)) or not np.any(direction):
        return None
    profile = coercivity_profile(ctx.instance, ctx.M, ctx.lam, direction, FAR_RADII)
    energies = [e for _, e in profile]
    falling = all(b < a for a, b in zip(energies, energies[1:]))
    return _energies(profile) if falling and energies[0] < 0 else None


def _solver_residual(ctx: VerifyContext) -> CheckOutcome:
    opts = SolveOptions(seed=ctx.seed(), restarts=2)
    report = minimize_global(ctx.instance, ctx.lam, opts, M=ctx.M)
    if not report.converged:
        falling = _unbounded_along(ctx, report.U.flat)
        if falling is not None:
            return SKIP, f"energy not bounded below; energies {falling} along the best state"
        return FAIL, f"global_min did not converge (residual {report.residual_inf:.3e})"
    recheck = float(np.max(np.abs(gradient_vector(ctx.instance, ctx.M, report.U.flat, ctx.lam))))
    zero_energy = energy_value(ctx.instance, ctx.M, np.zeros(ctx.instance.size), ctx.lam)
    ok = recheck <= 10.0 * opts.grad_tol and report.energy.total <= zero_energy
    return _verdict(ok), f"residual {recheck:.3e}, energy {report.energy.total:.12g}"


def _endpoint_descent(ctx: VerifyContext) -> CheckOutcome:
    direction = GridFunction.from_flat(
        ctx.instance.m, ctx.instance.n, ctx.rng.standard_normal(ctx.instance.size)
    )
    try:
        endpoint = find_negative_endpoint(ctx.instance, ctx.lam, M=ctx.M, direction=direction)
    except EndpointNotBelowZero:
        profile = coercivity_profile(ctx.instance, ctx.M, ctx.lam, direction.flat, COERCIVE_RADII)
        energies = [e for _, e in profile]
        growing = all(b > a for a, b in zip(energies, energies[1:])) and energies[0] > 0
        return _verdict(growing), "no negative energy along the ray; energies " + _energies(
            profile
        )
    value = energy_value(ctx.instance, ctx.M, endpoint.flat, ctx.lam)
    return _verdict(value < 0), f"endpoint energy {value:.6g}"


def _mountain_pass_endpoint(ctx: VerifyContext) -> Optional[GridFunction]:
    m, n = ctx.instance.m, ctx.instance.n
    candidates = [
        GridFunction.constant(m, n, 1.0),
        GridFunction.from_flat(m, n, ctx.rng.standard_normal(ctx.instance.size)),
    ]
    for direction in candidates:
        try:
            return find_negative_endpoint(ctx.instance, ctx.lam, M=ctx.M, direction=direction)
        except EndpointNotBelowZero:
            continue
    return None


def _mountain_pass_level(ctx: VerifyContext) -> CheckOutcome:
    floor = sphere_energy_floor(
        ctx.instance, ctx.M, ctx.lam, LOCAL_MIN_RADIUS, samples=200, seed=ctx.seed()
    )
    if not floor.min_energy > 0:
        return SKIP, f"0 is not a strict local minimum (sphere floor {floor.min_energy:.3g})"
    endpoint = _mountain_pass_endpoint(ctx)
    if endpoint is None:
        return SKIP, "no negative-energy endpoint"
    opts = SolveOptions(seed=ctx.seed())
    mp = MountainPassOptions(endpoint=endpoint, path_points=32, deform_steps=2000)
    report = mountain_pass(ctx.instance, ctx.lam, mp, opts, M=ctx.M)
    detail = (
        f"energy {report.energy.total:.12g}, path maximum "
        f"{report.extras['path_max_energy']:.6g}, nontrivial {report.nontrivial}"
    )
    if not report.converged:
        return SKIP, f"mountain_pass did not converge (residual {report.residual_inf:.3e})"
    ok = report.nontrivial and report.energy.total >= -SADDLE_ENERGY_SLACK * opts.grad_tol
    return _verdict(ok), detail


def _sublevel_inside(ctx: VerifyContext) -> CheckOutcome:
    alpha = ctx.params.alpha if ctx.params is not None else None
    if alpha is None:
        return SKIP, "no alpha given"
    sub = SublevelOptions.from_spectrum(alpha, ctx.spectrum)
    report = minimize_sublevel(
        ctx.instance, ctx.lam, sub, SolveOptions(seed=ctx.seed(), restarts=2), M=ctx.M
    )
    level = report.extras["phi"]
    return _verdict(level < sub.r), f"phi(U) = {level:.12g}, r = {sub.r:.12g}"


def _sweep_nontriviality(ctx: VerifyContext) -> CheckOutcome:
    lambdas = [0.5 * ctx.lam, ctx.lam]
    opts = SolveOptions(seed=ctx.seed(), restarts=2)
    warm = sweep_lambda(ctx.instance, lambdas, opts=opts)
    cold = sweep_lambda(ctx.instance, lambdas, opts=opts, threads=2)
    compared = []
    for a, b in zip(warm, cold):
        if a.report is None or b.report is None:
            continue
        if not (a.report.converged and b.report.converged):
            continue
        if a.report.nontrivial != b.report.nontrivial:
            return FAIL, (
                f"lambda {a.lam:g}: warm nontrivial {a.report.nontrivial}, "
                f"cold nontrivial {b.report.nontrivial}"
            )
        compared.append(f"{a.lam:g}")
    if not compared:
        return SKIP, "no lambda with converged warm and cold solves"
    return PASS, f"warm and cold agree at lambda {', '.join(compared)}"


def _threshold_scaling(ctx: VerifyContext) -> CheckOutcome:
    scaled = ProblemInstance(
        grid=ctx.instance.grid.scaled(SCALE_FACTOR),
        nonlinearity=ctx.instance.nonlinearity,
    )
    spectrum = eigen_extremes(assemble_M(scaled.grid), method=ctx.eigensolver)
    params = ctx.params or HypothesisParams()
    base = thresholds(ctx.instance, ctx.spectrum, params)
    other = thresholds(scaled, spectrum, params)
    pairs = [
        ("lambda_min", base.lambda_min, other.lambda_min),
        ("lambda_max", base.lambda_max, other.lambda_max),
        ("sublevel_upper", base.sublevel_upper, other.sublevel_upper),
        ("negative_well_lower", base.negative_well_lower, other.negative_well_lower),
        ("bounded_growth_upper", base.bounded_growth_upper, other.bounded_growth_upper),
        ("mountain_pass_lower", base.mountain_pass_lower, other.mountain_pass_lower),
    ]
    for name, before, after in pairs:
        if before is None or after is None:
            continue
        if abs(after - SCALE_FACTOR * before) > 1e-8 * abs(SCALE_FACTOR * before):
            return FAIL, f"{name} scaled to {after:.12g}, expected {SCALE_FACTOR * before:.12g}"
    return PASS, f"all thresholds scale by {SCALE_FACTOR}"


def _sublevel_ratio(ctx: VerifyContext) -> CheckOutcome:
    alpha = ctx.params.alpha if ctx.params is not None else None
    if alpha is None:
        return SKIP, "no alpha given"
    try:
        lam_star = threshold_lambda_star(ctx.instance, ctx.spectrum, alpha)
    except NonpositiveDenominator as e:
        return SKIP, f"sublevel threshold undefined: {e}"
    product = lam_star * sublevel_ratio_bound(ctx.instance, ctx.spectrum, alpha)
    return _verdict(abs(product - 1.0) <= 1e-12), f"lambda* times ratio bound = {product!r}"


CHECKS: List[Tuple[str, str, Callable[[VerifyContext], CheckOutcome]]] = [
    ("flattening_round_trip", "grid_problem", _flattening),
    ("primitive_consistency", "grid_problem", _primitive_consistency),
    ("matrix_symmetric", "assembly", _symmetry),
    ("stencil_matches_matrix", "assembly", _stencil_matches_matrix),
    ("positive_definite", "spectral", _positive_definite),
    ("eigensolvers_agree", "spectral", _eigensolvers_agree),
    ("rayleigh_bounds", "spectral", _rayleigh_bounds),
    ("quadratic_lower_bound", "spectral", _quadratic_lower_bound),
    ("energy_bounds", "energy", _energy_bounds),
    ("energy_identity", "energy", _energy_identity),
    ("gradient_consistency", "energy", _gradient_consistency),
    ("converged_residual", "solvers", _solver_residual),
    ("negative_endpoint", "solvers", _endpoint_descent),
    ("mountain_pass_nonnegative", "solvers", _mountain_pass_level),
    ("sublevel_inside", "solvers", _sublevel_inside),
    ("sweep_nontriviality", "solvers", _sweep_nontriviality),
    ("threshold_scaling", "regimes", _threshold_scaling),
    ("sublevel_ratio_reciprocal", "regimes", _sublevel_ratio),
]


def run_invariants(
    instance: ProblemInstance,
    lam: Optional[float] = None,
    params: Optional[HypothesisParams] = None,
    seed: int = 0,
    samples: int = 50,
    eigensolver: str = "jacobi",
) -> pd.DataFrame:
    M = assemble_M(instance.grid)
    ctx = VerifyContext(
        instance=instance,
        M=M,
        spectrum=eigen_extremes(M, method=eigensolver),
        lam=1.0 if lam is None else float(lam),
        params=params,
        rng=np.random.default_rng(seed),
        samples=samples,
        eigensolver=eigensolver,
    )
    rows = []
    for name, module, check in CHECKS:
        try:
            status, detail = check(ctx)
        except BvpError as e:
            status, detail = FAIL, f"{type(e).__name__}: {e}"
        logger.info(f"{name}: {status} ({detail})")
        rows.append({"check": name, "module": module, "status": status, "detail": detail})
    return pd.DataFrame(rows, columns=["check", "module", "status", "detail"])


def failed_checks(frame: pd.DataFrame) -> List[str]:
    return frame.loc[frame["status"] == FAIL, "check"].tolist()
