"""Parameter thresholds for the existence mechanisms and sampled audits of their hypotheses.

Hypotheses on the primitive F, by name:

- steep_at_zero: F(t)/t^2 -> +inf as t -> 0
- negative_well: F(t) < -c t^2 for 0 < |t| < eta
- positive_well: F(t) > c t^2 for 0 < |t| < eta (sign-flipped reading of negative_well)
- subquadratic_growth: F(t) < a |t|^alpha_growth + b for |t| >= T
- bounded_quadratic_ratio: limsup_{|t| -> inf} F(t)/t^2 < A
- quadratic_lower_bound: F((i,j), t) >= alpha(i,j) t^2 + beta(i,j) for |t| > M_cut
- flat_at_zero: F(t)/t^2 -> 0 as |t| -> 0

Limit hypotheses are only ever audited on finite samples; their reports carry
``evidence_only=True``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidParameter, NonpositiveDenominator, RangeInvalid
from .assembly import SystemMatrix, assemble_M
from .energy import energy_value
from .grid_problem import ProblemInstance
from .line_search import maximize_on_interval
from .nonlinearity import Kernel
from .spectral import SpectrumSummary

logger = logging.getLogger(__name__)

MAX_SEARCH_SAMPLES = 10_000
MAX_SEARCH_TOL = 1e-12
STEEP_RATIO = 1e3
FLAT_RATIO = 1e-3
TAIL_FRACTION = 0.1
MIN_SAMPLES = 100

HYPOTHESES = (
    "steep_at_zero",
    "negative_well",
    "positive_well",
    "subquadratic_growth",
    "bounded_quadratic_ratio",
    "quadratic_lower_bound",
    "flat_at_zero",
)
LIMIT_HYPOTHESES = ("steep_at_zero", "bounded_quadratic_ratio", "flat_at_zero")
HYPOTHESIS_ALIASES = {
    "H1": "steep_at_zero",
    "H2": "negative_well",
    "H2prime": "positive_well",
    "H3": "subquadratic_growth",
    "H4": "bounded_quadratic_ratio",
    "H5": "quadratic_lower_bound",
    "H6": "flat_at_zero",
}

MECHANISMS = ("sublevel", "negative_well", "bounded_growth", "mountain_pass")
MECHANISM_HYPOTHESES = {
    "sublevel": ("steep_at_zero",),
    "negative_well": ("negative_well", "positive_well", "subquadratic_growth"),
    "bounded_growth": ("negative_well", "positive_well", "bounded_quadratic_ratio"),
    "mountain_pass": ("quadratic_lower_bound", "flat_at_zero"),
}
RECOMMENDED_METHOD = {
    "sublevel": "sublevel_min",
    "negative_well": "global_min",
    "bounded_growth": "global_min",
    "mountain_pass": "mountain_pass",
}


def hypothesis_name(which: str) -> str:
    name = HYPOTHESIS_ALIASES.get(which, which)
    if name not in HYPOTHESES:
        raise InvalidParameter(
            f"unknown hypothesis '{which}'; expected one of {HYPOTHESES}", field="hypothesis"
        )
    return name


def _optional_table(value: Any, name: str) -> Optional[np.ndarray]:
    if value is None:
        return None
    table = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(table)):
        raise InvalidParameter(f"{name} must be finite", field=name)
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class HypothesisParams:
    c: Optional[float] = None
    eta: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    T: Optional[float] = None
    alpha_growth: Optional[float] = None
    A: Optional[float] = None
    alpha_table: Optional[Any] = None
    beta_table: Optional[Any] = None
    M_cut: Optional[float] = None
    # ball parameter of the sublevel mechanism
    alpha: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("c", "eta", "a", "T", "A", "M_cut", "alpha"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise InvalidParameter(f"{name} must be positive, got {value}", field=name)
        if self.b is not None and not np.isfinite(self.b):
            raise InvalidParameter("b must be finite", field="b")
        if self.alpha_growth is not None and not 1.0 < self.alpha_growth < 2.0:
            raise InvalidParameter(
                f"alpha_growth must lie in (1, 2), got {self.alpha_growth}", field="alpha_growth"
            )
        alpha_table = _optional_table(self.alpha_table, "alpha_table")
        if alpha_table is not None and not np.all(alpha_table > 0):
            raise InvalidParameter("alpha_table entries must be positive", field="alpha_table")
        object.__setattr__(self, "alpha_table", alpha_table)
        object.__setattr__(self, "beta_table", _optional_table(self.beta_table, "beta_table"))

    @property
    def alpha_minus(self) -> Optional[float]:
        return None if self.alpha_table is None else float(np.min(self.alpha_table))

    @property
    def beta_minus(self) -> Optional[float]:
        return None if self.beta_table is None else float(np.min(self.beta_table))

    def check_shape(self, m: int, n: int) -> None:
        """Node tables must cover the m x n interior exactly."""
        for name in ("alpha_table", "beta_table"):
            table = getattr(self, name)
            if table is not None and table.shape != (m, n):
                raise InvalidParameter(
                    f"{name} must have shape ({m}, {n}), got {table.shape}", field=name
                )

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for name in ("c", "eta", "a", "b", "T", "alpha_growth", "A", "M_cut", "alpha"):
            value = getattr(self, name)
            if value is not None:
                out[name] = float(value)
        for name in ("alpha_table", "beta_table"):
            table = getattr(self, name)
            if table is not None:
                out[name] = table.tolist()
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "HypothesisParams":
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise InvalidParameter(
                f"unexpected hypothesis parameter '{unknown[0]}'", field=unknown[0]
            )
        return cls(**dict(data))


def _require(params: HypothesisParams, *names: str) -> None:
    for name in names:
        if getattr(params, name) is None:
            raise InvalidParameter(f"this check needs the parameter '{name}'", field=name)


def _kernel_extreme(kernel: Kernel, alpha: float, where=None, maximise: bool = True) -> float:
    """max (or min) of the kernel primitive on [-alpha, alpha]: dense sampling plus refinement."""
    sign = 1.0 if maximise else -1.0
    t = np.linspace(-alpha, alpha, MAX_SEARCH_SAMPLES + 1)
    values = sign * kernel.F(t, where)
    k = int(np.argmax(values))
    lo = t[max(k - 1, 0)]
    hi = t[min(k + 1, t.size - 1)]
    _, refined = maximize_on_interval(
        lambda s: sign * float(kernel.F(np.float64(s), where)), lo, hi, xtol=MAX_SEARCH_TOL
    )
    return sign * max(refined, float(values[k]))


def node_maxima(instance: ProblemInstance, alpha: float) -> np.ndarray:
    """max_{|t| <= alpha} F((i, j), t) for every interior node, as an (m, n) array."""
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}", field="alpha")
    spec = instance.nonlinearity
    kernel = spec.kernel
    shape = (instance.m, instance.n)
    coefficient = np.ones(shape) if spec.coefficient is None else spec.coefficient
    if spec.node_table_shape is not None:
        out = np.empty(shape)
        for index in np.ndindex(shape):
            c = float(coefficient[index])
            out[index] = c * _kernel_extreme(kernel, alpha, index, maximise=c >= 0)
        return out
    # separable: c * F_kind, so the node maximum is c * max F_kind or c * min F_kind
    high = _kernel_extreme(kernel, alpha, maximise=True)
    low = _kernel_extreme(kernel, alpha, maximise=False) if np.any(coefficient < 0) else high
    return np.where(coefficient >= 0, coefficient * high, coefficient * low)


def threshold_lambda_star(
    instance: ProblemInstance, spectrum: SpectrumSummary, alpha: float
) -> float:
    """lambda_1 alpha^2 / (2 sum_nodes max_{|t| <= alpha} F)."""
    denominator = float(np.sum(node_maxima(instance, alpha)))
    if not denominator > 0:
        raise NonpositiveDenominator(
            f"sum of node maxima of F on |t| <= {alpha} is {denominator:.6g}; "
            "the sublevel threshold is undefined"
        )
    return spectrum.lambda_min * alpha**2 / (2.0 * denominator)


def sublevel_ratio_bound(
    instance: ProblemInstance, spectrum: SpectrumSummary, alpha: float
) -> float:
    """Upper bound (1/r) sum_nodes max F of the sublevel ratio; its reciprocal is lambda*."""
    r = 0.5 * spectrum.lambda_min * alpha**2
    return float(np.sum(node_maxima(instance, alpha))) / r


@dataclass(frozen=True)
class ThresholdReport:
    lambda_min: float
    lambda_max: float
    sublevel_upper: Optional[float] = None
    negative_well_lower: Optional[float] = None
    bounded_growth_upper: Optional[float] = None
    mountain_pass_lower: Optional[float] = None
    inputs: Mapping[str, Any] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def interval(self, mechanism: str) -> Optional[Tuple[float, float]]:
        bounds = {
            "sublevel": (0.0, self.sublevel_upper),
            "negative_well": (self.negative_well_lower, np.inf),
            "bounded_growth": (0.0, self.bounded_growth_upper),
            "mountain_pass": (self.mountain_pass_lower, np.inf),
        }[mechanism]
        if bounds[0] is None or bounds[1] is None:
            return None
        return float(bounds[0]), float(bounds[1])


def thresholds(
    instance: ProblemInstance, spectrum: SpectrumSummary, params: HypothesisParams
) -> ThresholdReport:
    params.check_shape(instance.m, instance.n)
    notes: List[str] = []
    sublevel_upper = None
    if params.alpha is not None:
        try:
            sublevel_upper = threshold_lambda_star(instance, spectrum, params.alpha)
        except NonpositiveDenominator as e:
            notes.append(str(e))
    alpha_minus = params.alpha_minus
    return ThresholdReport(
        lambda_min=spectrum.lambda_min,
        lambda_max=spectrum.lambda_max,
        sublevel_upper=sublevel_upper,
        negative_well_lower=(
            spectrum.lambda_max / (2.0 * params.c) if params.c is not None else None
        ),
        bounded_growth_upper=(
            spectrum.lambda_min / (2.0 * params.A) if params.A is not None else None
        ),
        mountain_pass_lower=(
            spectrum.lambda_max / (2.0 * alpha_minus) if alpha_minus is not None else None
        ),
        inputs=params.to_dict(),
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class Witness:
    node: Tuple[int, int]
    t: float
    value: float


@dataclass(frozen=True)
class HypothesisCheckReport:
    hypothesis: str
    verdict: str
    witness: Optional[Witness]
    sampled_range: Tuple[float, float]
    sample_count: int
    evidence_only: bool = False
    detail: str = ""

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"


def default_range(
    instance: ProblemInstance, which: str, params: HypothesisParams
) -> Tuple[float, float]:
    name = hypothesis_name(which)
    if name in ("steep_at_zero", "flat_at_zero"):
        lo, hi = 1e-8, 1e-1
    elif name in ("negative_well", "positive_well"):
        _require(params, "eta")
        lo, hi = 0.0, float(params.eta)
    elif name == "subquadratic_growth":
        _require(params, "T")
        lo, hi = float(params.T), max(10.0 * params.T, 100.0)
    elif name == "quadratic_lower_bound":
        _require(params, "M_cut")
        lo, hi = float(params.M_cut), max(10.0 * params.M_cut, 100.0)
    else:
        lo, hi = 1.0, 1e6
    arg_lo, arg_hi = instance.nonlinearity.kernel.argument_range()
    reach = min(-arg_lo, arg_hi)
    return lo, min(hi, reach)


def _node_primitive(instance: ProblemInstance, t: np.ndarray) -> np.ndarray:
    """F at every node for every sample: shape (samples, m, n)."""
    spec = instance.nonlinearity
    shape = (instance.m, instance.n)
    return np.stack([spec.F_values(np.full(shape, float(s))) for s in t])


def _first_violation(t: np.ndarray, F: np.ndarray, bad: np.ndarray) -> Optional[Witness]:
    hits = np.argwhere(bad)
    if hits.size == 0:
        return None
    k, i, j = (int(v) for v in hits[0])
    return Witness(node=(i + 1, j + 1), t=float(t[k]), value=float(F[k, i, j]))


def check_hypothesis(
    instance: ProblemInstance,
    which: str,
    params: Optional[HypothesisParams] = None,
    t_range: Optional[Tuple[float, float]] = None,
    samples: int = 1000,
) -> HypothesisCheckReport:
    name = hypothesis_name(which)
    params = params or HypothesisParams()
    params.check_shape(instance.m, instance.n)
    if samples < MIN_SAMPLES:
        raise RangeInvalid(f"at least {MIN_SAMPLES} samples are needed, got {samples}")
    lo, hi = t_range if t_range is not None else default_range(instance, name, params)
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi) and 0 <= lo < hi):
        raise RangeInvalid(f"sample range must satisfy 0 <= t_lo < t_hi, got ({lo}, {hi})")

    if name in LIMIT_HYPOTHESES:
        return _check_limit(instance, name, params, lo, hi, samples)

    grid = np.linspace(lo, hi, samples)
    if name in ("negative_well", "positive_well"):
        _require(params, "c", "eta")
        keep = (grid > 0) & (grid < params.eta)
    elif name == "subquadratic_growth":
        _require(params, "a", "b", "T", "alpha_growth")
        keep = grid >= params.T
    else:
        _require(params, "alpha_table", "beta_table", "M_cut")
        keep = grid > params.M_cut
    grid = grid[keep]
    if grid.size == 0:
        raise RangeInvalid(f"no sample of ({lo}, {hi}) lies where {name} applies")

    t = np.concatenate([grid, -grid])
    F = _node_primitive(instance, t)
    tt = t[:, None, None]
    if name == "negative_well":
        bad = ~(F < -params.c * tt**2)
    elif name == "positive_well":
        bad = ~(F > params.c * tt**2)
    elif name == "subquadratic_growth":
        bad = ~(F < params.a * np.abs(tt) ** params.alpha_growth + params.b)
    else:
        bad = ~(F >= params.alpha_table[None] * tt**2 + params.beta_table[None])

    witness = _first_violation(t, F, bad)
    report = HypothesisCheckReport(
        hypothesis=name,
        verdict="violated" if witness else "consistent",
        witness=witness,
        sampled_range=(lo, hi),
        sample_count=int(t.size),
    )
    logger.info(f"{name}: {report.verdict} over {report.sample_count} samples")
    return report


def _check_limit(
    instance: ProblemInstance,
    name: str,
    params: HypothesisParams,
    lo: float,
    hi: float,
    samples: int,
) -> HypothesisCheckReport:
    if lo <= 0:
        raise RangeInvalid(f"{name} samples a geometric grid and needs t_lo > 0, got {lo}")
    grid = np.geomspace(lo, hi, samples)
    t = np.concatenate([grid, -grid])
    F = _node_primitive(instance, t)
    ratio = F / (t**2)[:, None, None]
    half = samples // 2
    witness = None
    detail = ""

    if name == "bounded_quadratic_ratio":
        _require(params, "A")
        tail = np.zeros(samples, dtype=bool)
        tail[samples - max(1, int(TAIL_FRACTION * samples)) :] = True
        tail = np.concatenate([tail, tail])
        bad = ~(ratio < params.A) & tail[:, None, None]
        witness = _first_violation(t, F, bad)
        detail = f"F/t^2 < {params.A} on the largest {TAIL_FRACTION:.0%} of |t|"
    else:
        steep = name == "steep_at_zero"
        # positive side occupies rows [0, samples), negative side [samples, 2 samples)
        for offset in (0, samples):
            smallest = ratio[offset]
            at_origin = ~(smallest > STEEP_RATIO) if steep else ~(np.abs(smallest) < FLAT_RATIO)
            if np.any(at_origin):
                i, j = (int(v) for v in np.argwhere(at_origin)[0])
                witness = Witness((i + 1, j + 1), float(t[offset]), float(F[offset, i, j]))
                break
            low = ratio[offset : offset + half]
            step = np.diff(low if steep else np.abs(low), axis=0)
            slack = 1e-12 * np.abs(low[1:])
            trend_broken = step > slack if steep else step < -slack
            if np.any(trend_broken):
                k, i, j = (int(v) for v in np.argwhere(trend_broken)[0])
                row = offset + k + 1
                witness = Witness((i + 1, j + 1), float(t[row]), float(F[row, i, j]))
                break
        detail = (
            f"F/t^2 above {STEEP_RATIO:g} at the smallest |t| and growing towards 0"
            if steep
            else f"|F/t^2| below {FLAT_RATIO:g} at the smallest |t| and shrinking towards 0"
        )

    report = HypothesisCheckReport(
        hypothesis=name,
        verdict="violated" if witness else "consistent",
        witness=witness,
        sampled_range=(lo, hi),
        sample_count=int(t.size),
        evidence_only=True,
        detail=detail,
    )
    logger.info(
        f"{name}: {report.verdict} (finite-sample evidence) over {report.sample_count} samples"
    )
    return report


def _hypothesis_ready(name: str, params: HypothesisParams) -> bool:
    needs = {
        "steep_at_zero": (),
        "flat_at_zero": (),
        "negative_well": ("c", "eta"),
        "positive_well": ("c", "eta"),
        "subquadratic_growth": ("a", "b", "T", "alpha_growth"),
        "bounded_quadratic_ratio": ("A",),
        "quadratic_lower_bound": ("alpha_table", "beta_table", "M_cut"),
    }[name]
    return all(getattr(params, field_name) is not None for field_name in needs)


def ready_hypotheses(params: HypothesisParams) -> Tuple[str, ...]:
    """Hypotheses whose parameters are all present in ``params``."""
    return tuple(name for name in HYPOTHESES if _hypothesis_ready(name, params))


@dataclass(frozen=True)
class MechanismVerdict:
    mechanism: str
    interval: Optional[Tuple[float, float]]
    contains_lambda: Optional[bool]
    hypotheses: Mapping[str, str]
    recommended_method: str


@dataclass(frozen=True)
class SphereFloor:
    radius: float
    min_energy: float
    samples: int


@dataclass(frozen=True)
class RegimeReport:
    lam: float
    thresholds: ThresholdReport
    mechanisms: Tuple[MechanismVerdict, ...]
    zero_is_solution: bool
    checks: Tuple[HypothesisCheckReport, ...]
    # sampled I_lambda floor on a small sphere; positive when 0 is ringed by a mountain
    sphere_floor: Optional[SphereFloor] = None


def regime_report(
    instance: ProblemInstance,
    spectrum: SpectrumSummary,
    lam: float,
    params: HypothesisParams,
    samples: int = 1000,
    sphere_radius: float = 0.1,
    seed: int = 0,
) -> RegimeReport:
    """Where lambda sits relative to each mechanism's interval, with the audits that apply."""
    report = thresholds(instance, spectrum, params)
    checks: Dict[str, HypothesisCheckReport] = {}
    for name in ready_hypotheses(params):
        try:
            checks[name] = check_hypothesis(instance, name, params, samples=samples)
        except RangeInvalid as e:
            logger.info(f"Skipping {name}: {e}")

    verdicts = []
    for mechanism in MECHANISMS:
        interval = report.interval(mechanism)
        contains = None if interval is None else bool(interval[0] < lam < interval[1])
        verdicts.append(
            MechanismVerdict(
                mechanism=mechanism,
                interval=interval,
                contains_lambda=contains,
                hypotheses={
                    name: checks[name].verdict
                    for name in MECHANISM_HYPOTHESES[mechanism]
                    if name in checks
                },
                recommended_method=RECOMMENDED_METHOD[mechanism],
            )
        )

    zero_values = instance.nonlinearity.zero_values((instance.m, instance.n))
    floor = sphere_energy_floor(
        instance, assemble_M(instance.grid), lam, sphere_radius, samples=samples, seed=seed
    )
    logger.info(f"Energy floor on the sphere of radius {sphere_radius:g}: {floor.min_energy:.6g}")
    return RegimeReport(
        lam=float(lam),
        thresholds=report,
        mechanisms=tuple(verdicts),
        zero_is_solution=bool(np.all(zero_values == 0.0)),
        checks=tuple(checks.values()),
        sphere_floor=floor,
    )


def coercivity_profile(
    instance: ProblemInstance,
    M: SystemMatrix,
    lam: float,
    direction: np.ndarray,
    radii: Sequence[float],
) -> List[Tuple[float, float]]:
    """I_lambda(t V / |V|) for each t in ``radii``."""
    v = np.asarray(direction, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if v.size != instance.size or norm == 0.0:
        raise InvalidParameter(
            "direction must be a nonzero vector of the grid size", field="direction"
        )
    v = v / norm
    return [(float(t), energy_value(instance, M, t * v, lam)) for t in radii]


def sphere_energy_floor(
    instance: ProblemInstance,
    M: SystemMatrix,
    lam: float,
    radius: float,
    samples: int = 1000,
    seed: int = 0,
) -> SphereFloor:
    """Smallest sampled I_lambda on the sphere |U| = radius."""
    if not radius > 0:
        raise InvalidParameter(f"radius must be positive, got {radius}", field="radius")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((samples, instance.size))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    floor = min(energy_value(instance, M, radius * d, lam) for d in directions)
    return SphereFloor(radius=float(radius), min_energy=float(floor), samples=samples)
