"""Problem files in, reports out.

A problem file is JSON::

    {"m": 2, "n": 2,
     "weights": [[0, 0, 0], [0, 1, 1], [0, 1, 1]],
     "nonlinearity": {"kind": "cubic_softening", "params": {}, "coefficient": null},
     "lambda": 2.0,
     "hypotheses": {"c": 0.5, "eta": 0.69, "alpha": 1.0}}

``weights[i][j]`` is p(i, j), row index i outer. Reports carry
``"schema_version": "1"`` and a ``"kind"``; floats are written with their
shortest round-trip representation and non-finite values as strings.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import (
    GridWeightError,
    InvalidParameter,
    ParseError,
    ShapeMismatch,
    UnknownKind,
    ValidationError,
)
from .assembly import SystemMatrix
from .energy import EnergyBreakdown
from .grid_problem import GridFunction, ProblemInstance, make_weight_grid
from .nonlinearity import NonlinearitySpec
from .regimes import (
    HypothesisCheckReport,
    HypothesisParams,
    MechanismVerdict,
    RegimeReport,
    SphereFloor,
    ThresholdReport,
    Witness,
)
from .solvers import SolveReport, SweepEntry
from .spectral import PositiveDefiniteCertificate, SpectrumSummary

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class ProblemFile:
    instance: ProblemInstance
    lam: Optional[float] = None
    hypotheses: Optional[HypothesisParams] = None


def _expect(condition: bool, message: str, location: str) -> None:
    if not condition:
        raise ValidationError(message, location)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _number_table(value: Any, rows: int, cols: int, location: str) -> List[List[float]]:
    _expect(isinstance(value, list), "expected a list of rows", location)
    _expect(len(value) == rows, f"expected {rows} rows, got {len(value)}", location)
    for i, row in enumerate(value):
        _expect(isinstance(row, list), "expected a list", f"{location}/{i}")
        _expect(len(row) == cols, f"expected {cols} entries, got {len(row)}", f"{location}/{i}")
        for j, entry in enumerate(row):
            _expect(_is_number(entry), "expected a number", f"{location}/{i}/{j}")
    return value


def parse_problem(text: str) -> ProblemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)
    return problem_from_dict(data)


def problem_from_dict(data: Any) -> ProblemFile:
    _expect(isinstance(data, dict), "problem must be a JSON object", "")
    for key in ("m", "n"):
        _expect(key in data, "missing field", f"/{key}")
        _expect(_is_int(data[key]) and data[key] >= 1, "expected a positive integer", f"/{key}")
    m, n = data["m"], data["n"]

    _expect("weights" in data, "missing field", "/weights")
    weights = _number_table(data["weights"], m + 1, n + 1, "/weights")
    try:
        grid = make_weight_grid(m, n, weights)
    except GridWeightError as e:
        i, j = e.node
        raise ValidationError(str(e), f"/weights/{i}/{j}")

    _expect("nonlinearity" in data, "missing field", "/nonlinearity")
    spec = _nonlinearity_from_dict(data["nonlinearity"], m, n)
    try:
        instance = ProblemInstance(grid=grid, nonlinearity=spec)
    except ShapeMismatch as e:
        raise ValidationError(str(e), "/nonlinearity/params/values")

    lam = data.get("lambda")
    if lam is not None:
        _expect(_is_number(lam) and np.isfinite(lam), "expected a finite number", "/lambda")
        lam = float(lam)

    hypotheses = None
    if data.get("hypotheses") is not None:
        raw = data["hypotheses"]
        _expect(isinstance(raw, dict), "expected an object", "/hypotheses")
        try:
            hypotheses = HypothesisParams.from_dict(raw)
            hypotheses.check_shape(m, n)
        except (InvalidParameter, TypeError, ValueError) as e:
            name = getattr(e, "field", None)
            raise ValidationError(str(e), f"/hypotheses/{name}" if name else "/hypotheses")

    unknown = sorted(set(data) - {"m", "n", "weights", "nonlinearity", "lambda", "hypotheses"})
    _expect(not unknown, "unexpected field", f"/{unknown[0]}" if unknown else "")
    logger.debug(f"Loaded {m}x{n} problem with {spec.kind} nonlinearity")
    return ProblemFile(instance=instance, lam=lam, hypotheses=hypotheses)


def _nonlinearity_from_dict(raw: Any, m: int, n: int) -> NonlinearitySpec:
    _expect(isinstance(raw, dict), "expected an object", "/nonlinearity")
    kind = raw.get("kind")
    _expect(isinstance(kind, str), "expected a string", "/nonlinearity/kind")
    params = raw.get("params") or {}
    _expect(isinstance(params, dict), "expected an object", "/nonlinearity/params")

    coefficient = raw.get("coefficient")
    if coefficient is not None:
        coefficient = _number_table(coefficient, m, n, "/nonlinearity/coefficient")
    primitive_mode = raw.get("primitive_mode", "closed_form")

    try:
        return NonlinearitySpec(
            kind=kind, params=params, coefficient=coefficient, primitive_mode=primitive_mode
        )
    except UnknownKind as e:
        raise ValidationError(str(e), "/nonlinearity/kind")
    except InvalidParameter as e:
        if e.field in ("coefficient", "primitive_mode"):
            raise ValidationError(str(e), f"/nonlinearity/{e.field}")
        location = f"/nonlinearity/params/{e.field}" if e.field else "/nonlinearity/params"
        raise ValidationError(str(e), location)


def load_problem_file(path: PathLike) -> ProblemFile:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read problem file {path}: {e.strerror}")
    return parse_problem(text)


def load_problem(path: PathLike) -> ProblemInstance:
    return load_problem_file(path).instance


def problem_to_dict(instance: ProblemInstance, lam: Optional[float] = None) -> Dict[str, Any]:
    spec = instance.nonlinearity
    nonlinearity: Dict[str, Any] = {"kind": spec.kind, "params": spec.kernel.params()}
    if spec.coefficient is not None:
        nonlinearity["coefficient"] = spec.coefficient.tolist()
    if spec.primitive_mode != "closed_form":
        nonlinearity["primitive_mode"] = spec.primitive_mode
    out: Dict[str, Any] = {
        "m": instance.m,
        "n": instance.n,
        "weights": instance.grid.p.tolist(),
        "nonlinearity": nonlinearity,
    }
    if lam is not None:
        out["lambda"] = lam
    return out


# numbers


def _num(value: Optional[float]) -> Any:
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else repr(value)


def _float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


def _plain(value: Any) -> Any:
    """Convert numpy scalars and containers to JSON-ready Python values."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _num(value)
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    return value


def _envelope(kind: str, body: Dict[str, Any]) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def _check_kind(data: Mapping[str, Any], kind: str) -> None:
    if data.get("schema_version") != SCHEMA_VERSION or data.get("kind") != kind:
        raise ValidationError(
            f"expected a schema {SCHEMA_VERSION} '{kind}' report, got "
            f"{data.get('schema_version')!r}/{data.get('kind')!r}",
            "/kind",
        )


# spectrum


def spectrum_to_dict(summary: SpectrumSummary) -> Dict[str, Any]:
    certificate = summary.pd_certificate
    return _envelope(
        "spectrum",
        {
            "method": summary.method,
            "lambda_min": _num(summary.lambda_min),
            "lambda_max": _num(summary.lambda_max),
            "trace": _num(summary.trace),
            "sweeps": summary.sweeps,
            "pd": summary.positive_definite,
            "spectrum": _plain(summary.full_spectrum),
            "pd_certificate": (
                None
                if certificate is None
                else {
                    "positive_definite": certificate.positive_definite,
                    "pivots": _plain(certificate.pivots),
                    "failed_at": certificate.failed_at,
                }
            ),
        },
    )


def spectrum_from_dict(data: Mapping[str, Any]) -> SpectrumSummary:
    _check_kind(data, "spectrum")
    raw = data.get("pd_certificate")
    certificate = None
    if raw is not None:
        certificate = PositiveDefiniteCertificate(
            positive_definite=bool(raw["positive_definite"]),
            pivots=tuple(float(v) for v in raw["pivots"]),
            failed_at=raw.get("failed_at"),
        )
    full = data.get("spectrum")
    return SpectrumSummary(
        lambda_min=float(data["lambda_min"]),
        lambda_max=float(data["lambda_max"]),
        trace=float(data["trace"]),
        full_spectrum=None if full is None else tuple(float(v) for v in full),
        pd_certificate=certificate,
        sweeps=int(data.get("sweeps", 0)),
        method=data.get("method", "jacobi"),
    )


# solve


def solve_report_body(report: SolveReport) -> Dict[str, Any]:
    return {
        "method": report.method,
        "lambda": _num(report.lam),
        "m": report.U.m,
        "n": report.U.n,
        "U": _plain(report.U.values),
        "residual_inf": _num(report.residual_inf),
        "energy": _plain(report.energy.to_dict()),
        "iterations": int(report.iterations),
        "converged": bool(report.converged),
        "nontrivial": bool(report.nontrivial),
        "trace": None if report.trace is None else _plain(report.trace),
        "extras": _plain(report.extras),
    }


def solve_report_to_dict(report: SolveReport) -> Dict[str, Any]:
    return _envelope("solve", solve_report_body(report))


def solve_report_from_body(data: Mapping[str, Any]) -> SolveReport:
    trace = data.get("trace")
    return SolveReport(
        U=GridFunction.from_values([[float(v) for v in row] for row in data["U"]]),
        method=data["method"],
        lam=float(data["lambda"]),
        residual_inf=float(data["residual_inf"]),
        energy=EnergyBreakdown.from_dict(data["energy"]),
        iterations=int(data["iterations"]),
        converged=bool(data["converged"]),
        nontrivial=bool(data["nontrivial"]),
        trace=None if trace is None else tuple((int(k), float(e), float(g)) for k, e, g in trace),
        extras=dict(data.get("extras") or {}),
    )


def solve_report_from_dict(data: Mapping[str, Any]) -> SolveReport:
    _check_kind(data, "solve")
    return solve_report_from_body(data)


def sweep_to_dict(method: str, entries: Sequence[SweepEntry]) -> Dict[str, Any]:
    return _envelope(
        "sweep",
        {
            "method": method,
            "entries": [
                {
                    "lambda": _num(entry.lam),
                    "report": None if entry.report is None else solve_report_body(entry.report),
                    "error": entry.error,
                }
                for entry in entries
            ],
        },
    )


def sweep_from_dict(data: Mapping[str, Any]) -> List[SweepEntry]:
    _check_kind(data, "sweep")
    return [
        SweepEntry(
            lam=float(raw["lambda"]),
            report=None if raw["report"] is None else solve_report_from_body(raw["report"]),
            error=raw.get("error"),
        )
        for raw in data["entries"]
    ]


def sweep_frame(entries: Sequence[SweepEntry]) -> pd.DataFrame:
    rows = []
    for entry in entries:
        report = entry.report
        rows.append(
            {
                "lambda": entry.lam,
                "method": report.method if report else None,
                "converged": report.converged if report else False,
                "nontrivial": report.nontrivial if report else False,
                "energy": report.energy.total if report else np.nan,
                "residual_inf": report.residual_inf if report else np.nan,
                "max_abs": report.max_abs if report else np.nan,
                "iterations": report.iterations if report else 0,
                "error": entry.error or "",
            }
        )
    return pd.DataFrame(rows)


# thresholds and hypotheses


def thresholds_body(report: ThresholdReport) -> Dict[str, Any]:
    return {
        "lambda_min": _num(report.lambda_min),
        "lambda_max": _num(report.lambda_max),
        "sublevel_upper": _num(report.sublevel_upper),
        "negative_well_lower": _num(report.negative_well_lower),
        "bounded_growth_upper": _num(report.bounded_growth_upper),
        "mountain_pass_lower": _num(report.mountain_pass_lower),
        "inputs": _plain(report.inputs),
        "notes": list(report.notes),
    }


def thresholds_to_dict(report: ThresholdReport) -> Dict[str, Any]:
    return _envelope("thresholds", thresholds_body(report))


def thresholds_from_body(data: Mapping[str, Any]) -> ThresholdReport:
    return ThresholdReport(
        lambda_min=float(data["lambda_min"]),
        lambda_max=float(data["lambda_max"]),
        sublevel_upper=_float(data.get("sublevel_upper")),
        negative_well_lower=_float(data.get("negative_well_lower")),
        bounded_growth_upper=_float(data.get("bounded_growth_upper")),
        mountain_pass_lower=_float(data.get("mountain_pass_lower")),
        inputs=dict(data.get("inputs") or {}),
        notes=tuple(data.get("notes") or ()),
    )


def thresholds_from_dict(data: Mapping[str, Any]) -> ThresholdReport:
    _check_kind(data, "thresholds")
    return thresholds_from_body(data)


def hypothesis_body(report: HypothesisCheckReport) -> Dict[str, Any]:
    witness = report.witness
    return {
        "hypothesis": report.hypothesis,
        "verdict": report.verdict,
        "witness": (
            None
            if witness is None
            else {"node": list(witness.node), "t": _num(witness.t), "value": _num(witness.value)}
        ),
        "sampled_range": _plain(report.sampled_range),
        "sample_count": report.sample_count,
        "evidence_only": report.evidence_only,
        "detail": report.detail,
    }


def hypothesis_to_dict(report: HypothesisCheckReport) -> Dict[str, Any]:
    return _envelope("hypothesis_check", hypothesis_body(report))


def hypothesis_from_body(data: Mapping[str, Any]) -> HypothesisCheckReport:
    raw = data.get("witness")
    witness = None
    if raw is not None:
        i, j = raw["node"]
        witness = Witness(node=(int(i), int(j)), t=float(raw["t"]), value=float(raw["value"]))
    lo, hi = data["sampled_range"]
    return HypothesisCheckReport(
        hypothesis=data["hypothesis"],
        verdict=data["verdict"],
        witness=witness,
        sampled_range=(float(lo), float(hi)),
        sample_count=int(data["sample_count"]),
        evidence_only=bool(data.get("evidence_only", False)),
        detail=data.get("detail", ""),
    )


def hypothesis_from_dict(data: Mapping[str, Any]) -> HypothesisCheckReport:
    _check_kind(data, "hypothesis_check")
    return hypothesis_from_body(data)


def hypothesis_batch_to_dict(reports: Sequence[HypothesisCheckReport]) -> Dict[str, Any]:
    return _envelope("hypothesis_checks", {"checks": [hypothesis_body(r) for r in reports]})


def hypothesis_batch_from_dict(data: Mapping[str, Any]) -> List[HypothesisCheckReport]:
    _check_kind(data, "hypothesis_checks")
    return [hypothesis_from_body(raw) for raw in data["checks"]]


def regime_to_dict(report: RegimeReport) -> Dict[str, Any]:
    floor = report.sphere_floor
    return _envelope(
        "regime",
        {
            "lambda": _num(report.lam),
            "thresholds": thresholds_body(report.thresholds),
            "zero_is_solution": report.zero_is_solution,
            "mechanisms": [
                {
                    "mechanism": verdict.mechanism,
                    "interval": _plain(verdict.interval),
                    "contains_lambda": verdict.contains_lambda,
                    "hypotheses": dict(verdict.hypotheses),
                    "recommended_method": verdict.recommended_method,
                }
                for verdict in report.mechanisms
            ],
            "checks": [hypothesis_body(check) for check in report.checks],
            "sphere_floor": (
                None
                if floor is None
                else {
                    "radius": _num(floor.radius),
                    "min_energy": _num(floor.min_energy),
                    "samples": floor.samples,
                }
            ),
        },
    )


def regime_from_dict(data: Mapping[str, Any]) -> RegimeReport:
    _check_kind(data, "regime")
    mechanisms = []
    for raw in data["mechanisms"]:
        interval = raw.get("interval")
        contains = raw.get("contains_lambda")
        mechanisms.append(
            MechanismVerdict(
                mechanism=raw["mechanism"],
                interval=None if interval is None else (float(interval[0]), float(interval[1])),
                contains_lambda=None if contains is None else bool(contains),
                hypotheses=dict(raw.get("hypotheses") or {}),
                recommended_method=raw["recommended_method"],
            )
        )
    floor = data.get("sphere_floor")
    return RegimeReport(
        lam=float(data["lambda"]),
        thresholds=thresholds_from_body(data["thresholds"]),
        mechanisms=tuple(mechanisms),
        zero_is_solution=bool(data["zero_is_solution"]),
        checks=tuple(hypothesis_from_body(raw) for raw in data["checks"]),
        sphere_floor=(
            None
            if floor is None
            else SphereFloor(
                radius=float(floor["radius"]),
                min_energy=float(floor["min_energy"]),
                samples=int(floor["samples"]),
            )
        ),
    )


def verify_to_dict(frame: pd.DataFrame) -> Dict[str, Any]:
    rows = [_plain(row) for row in frame.to_dict(orient="records")]
    counts = frame["status"].value_counts()
    return _envelope(
        "verify",
        {
            "passed": bool(counts.get("fail", 0) == 0),
            "counts": {status: int(counts.get(status, 0)) for status in ("pass", "fail", "skip")},
            "checks": rows,
        },
    )


def verify_from_dict(data: Mapping[str, Any]) -> pd.DataFrame:
    _check_kind(data, "verify")
    return pd.DataFrame(
        [
            {
                "check": raw["check"],
                "module": raw["module"],
                "status": raw["status"],
                "detail": raw["detail"],
            }
            for raw in data["checks"]
        ],
        columns=["check", "module", "status", "detail"],
    )


# writers


def dumps_report(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def write_report(payload: Mapping[str, Any], path: PathLike) -> None:
    Path(path).write_text(dumps_report(payload))
    logger.info(f"Wrote {payload.get('kind')} report to {path}")


def read_report(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)


def matrix_frame(M: SystemMatrix) -> pd.DataFrame:
    dense = M.to_dense()
    labels = [f"k{k}" for k in range(1, M.order + 1)]
    return pd.DataFrame(dense, index=labels, columns=labels)


def write_matrix_csv(M: SystemMatrix, path: PathLike) -> None:
    matrix_frame(M).to_csv(path, float_format="%.17g")
    logger.info(f"Wrote dense {M.order}x{M.order} matrix to {path}")


def write_sweep_csv(entries: Sequence[SweepEntry], path: PathLike) -> None:
    sweep_frame(entries).to_csv(path, index=False, float_format="%.17g")
