import json

import numpy as np
import pandas as pd
import pytest

from tests.conftest import SQRT5, make_instance
from weighted_bvp.errors import ParseError, ValidationError
from weighted_bvp.services.assembly import assemble_M
from weighted_bvp.services.problem_io import (
    dumps_report,
    hypothesis_batch_from_dict,
    hypothesis_batch_to_dict,
    hypothesis_from_dict,
    hypothesis_to_dict,
    load_problem,
    load_problem_file,
    matrix_frame,
    parse_problem,
    problem_from_dict,
    problem_to_dict,
    read_report,
    regime_from_dict,
    regime_to_dict,
    solve_report_from_dict,
    solve_report_to_dict,
    spectrum_from_dict,
    spectrum_to_dict,
    sweep_from_dict,
    sweep_to_dict,
    thresholds_from_dict,
    thresholds_to_dict,
    verify_from_dict,
    verify_to_dict,
    write_matrix_csv,
    write_report,
    write_sweep_csv,
)
from weighted_bvp.services.regimes import (
    HypothesisParams,
    check_hypothesis,
    ready_hypotheses,
    regime_report,
    thresholds,
)
from weighted_bvp.services.solvers import SolveOptions, minimize_global, sweep_lambda
from weighted_bvp.services.spectral import eigen_extremes

UNIT = {
    "m": 2,
    "n": 2,
    "weights": [[0, 0, 0], [0, 1, 1], [0, 1, 1]],
    "nonlinearity": {"kind": "cubic_softening"},
}


def test_load_unit_fixture(fixtures_dir):
    problem = load_problem_file(fixtures_dir / "unit2x2.json")
    assert (problem.instance.m, problem.instance.n) == (2, 2)
    assert problem.instance.nonlinearity.kind == "cubic_softening"
    assert problem.lam == 2.0
    assert problem.hypotheses.c == 0.5
    assert problem.hypotheses.alpha_minus == 1.0
    assert load_problem(fixtures_dir / "unit2x2.json").grid.interior.tolist() == [[1, 1], [1, 1]]


def test_boundary_weight_location(fixtures_dir):
    with pytest.raises(ValidationError) as excinfo:
        load_problem(fixtures_dir / "bad_boundary.json")
    assert excinfo.value.location == "/weights/0/1"


def test_unknown_kind_location(fixtures_dir):
    with pytest.raises(ValidationError) as excinfo:
        load_problem(fixtures_dir / "unknown_kind.json")
    assert excinfo.value.location == "/nonlinearity/kind"


def test_interior_weight_location():
    data = dict(UNIT, weights=[[0, 0, 0], [0, 1, 1], [0, 1, -2]])
    with pytest.raises(ValidationError) as excinfo:
        problem_from_dict(data)
    assert excinfo.value.location == "/weights/2/2"


@pytest.mark.parametrize(
    "patch, location",
    [
        ({"m": 0}, "/m"),
        ({"n": 1.5}, "/n"),
        ({"weights": [[0, 0, 0], [0, 1, 1]]}, "/weights"),
        ({"weights": [[0, 0, 0], [0, 1, "x"], [0, 1, 1]]}, "/weights/1/2"),
        (
            {"nonlinearity": {"kind": "power", "params": {"gamma": 0.5}}},
            "/nonlinearity/params/gamma",
        ),
        (
            {"nonlinearity": {"kind": "linear", "coefficient": [[1, 1]]}},
            "/nonlinearity/coefficient",
        ),
        ({"lambda": "two"}, "/lambda"),
        ({"hypotheses": {"c": -1}}, "/hypotheses/c"),
        ({"hypotheses": {"alpha_table": [[1, 1, 1]]}}, "/hypotheses/alpha_table"),
        ({"hypotheses": {"beta_table": [0.0]}}, "/hypotheses/beta_table"),
        ({"colour": "blue"}, "/colour"),
    ],
)
def test_validation_locations(patch, location):
    with pytest.raises(ValidationError) as excinfo:
        problem_from_dict(dict(UNIT, **patch))
    assert excinfo.value.location == location


def test_missing_field():
    data = dict(UNIT)
    del data["nonlinearity"]
    with pytest.raises(ValidationError) as excinfo:
        problem_from_dict(data)
    assert excinfo.value.location == "/nonlinearity"


def test_parse_error_position():
    with pytest.raises(ParseError) as excinfo:
        parse_problem('{"m": 2,\n  "n": }')
    assert excinfo.value.line == 2
    assert excinfo.value.column is not None


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_problem(tmp_path / "absent.json")


def test_problem_dict_round_trip(unit_grid):
    instance = make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})
    again = problem_from_dict(problem_to_dict(instance, lam=0.5))
    assert again.lam == 0.5
    assert problem_to_dict(again.instance, 0.5) == problem_to_dict(instance, 0.5)


def test_spectrum_report(unit_grid):
    summary = eigen_extremes(assemble_M(unit_grid))
    payload = spectrum_to_dict(summary)
    assert payload["schema_version"] == "1"
    assert payload["kind"] == "spectrum"
    assert payload["lambda_min"] == pytest.approx(3.0 - SQRT5)
    back = spectrum_from_dict(json.loads(dumps_report(payload)))
    assert back == summary


def test_report_kind_checked(unit_grid):
    payload = spectrum_to_dict(eigen_extremes(assemble_M(unit_grid)))
    with pytest.raises(ValidationError):
        solve_report_from_dict(payload)


def test_solve_report_round_trip(single_grid):
    instance = make_instance(single_grid, "cubic_softening")
    report = minimize_global(instance, 2.0, SolveOptions(record_trace=True, restarts=1))
    payload = json.loads(dumps_report(solve_report_to_dict(report)))
    back = solve_report_from_dict(payload)
    assert back.U.values.tolist() == report.U.values.tolist()
    assert back.energy == report.energy
    assert back.trace == report.trace
    assert (back.converged, back.nontrivial, back.iterations) == (
        report.converged,
        report.nontrivial,
        report.iterations,
    )


def test_non_finite_numbers_become_strings(single_grid):
    instance = make_instance(single_grid, "cubic_softening")
    spectrum = eigen_extremes(assemble_M(single_grid))
    params = HypothesisParams(c=0.5)
    # the negative_well interval is unbounded above
    text = dumps_report(regime_to_dict(regime_report(instance, spectrum, 1.0, params)))
    assert '"inf"' in text

    report = thresholds(instance, spectrum, params)
    assert thresholds_from_dict(json.loads(dumps_report(thresholds_to_dict(report)))) == report


def test_hypothesis_report_round_trip(unit_grid):
    instance = make_instance(unit_grid, "damped_quadratic")
    report = check_hypothesis(instance, "negative_well", HypothesisParams(c=0.5, eta=1.0))
    assert report.witness is not None
    back = hypothesis_from_dict(json.loads(dumps_report(hypothesis_to_dict(report))))
    assert back == report


def test_sweep_report_round_trip(single_grid):
    instance = make_instance(single_grid, "cubic_softening")
    entries = sweep_lambda(instance, [1.5, 2.0])
    back = sweep_from_dict(json.loads(dumps_report(sweep_to_dict("global_min", entries))))
    assert [e.lam for e in back] == [1.5, 2.0]
    assert back[1].report.max_abs == pytest.approx(1.0)


def test_write_and_read_report(tmp_path, unit_grid):
    payload = spectrum_to_dict(eigen_extremes(assemble_M(unit_grid)))
    path = tmp_path / "spectrum.json"
    write_report(payload, path)
    assert read_report(path) == json.loads(dumps_report(payload))


def test_read_report_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(ParseError):
        read_report(path)


def test_matrix_csv(tmp_path, unit_grid):
    M = assemble_M(unit_grid)
    assert list(matrix_frame(M).columns) == ["k1", "k2", "k3", "k4"]
    path = tmp_path / "M.csv"
    write_matrix_csv(M, path)
    frame = pd.read_csv(path, index_col=0)
    assert np.array_equal(frame.to_numpy(), M.to_dense())


def test_sweep_csv(tmp_path, single_grid):
    instance = make_instance(single_grid, "cubic_softening")
    path = tmp_path / "sweep.csv"
    write_sweep_csv(sweep_lambda(instance, [2.0, 3.0]), path)
    frame = pd.read_csv(path)
    assert frame["lambda"].tolist() == [2.0, 3.0]
    assert frame["converged"].all()
    assert frame["max_abs"].tolist() == pytest.approx([1.0, 2.0 / np.sqrt(3.0)])


def test_regime_report_round_trip(single_grid):
    instance = make_instance(single_grid, "cubic_softening")
    spectrum = eigen_extremes(assemble_M(single_grid))
    report = regime_report(instance, spectrum, 1.0, HypothesisParams(c=0.5))
    back = regime_from_dict(json.loads(dumps_report(regime_to_dict(report))))
    assert back.lam == report.lam
    assert back.thresholds == report.thresholds
    assert back.zero_is_solution == report.zero_is_solution
    assert back.sphere_floor == report.sphere_floor
    assert [v.mechanism for v in back.mechanisms] == [v.mechanism for v in report.mechanisms]
    assert [v.interval for v in back.mechanisms] == [v.interval for v in report.mechanisms]
    assert [c.verdict for c in back.checks] == [c.verdict for c in report.checks]


def test_hypothesis_batch_round_trip(unit_grid):
    instance = make_instance(unit_grid, "damped_quadratic")
    params = HypothesisParams(c=0.5, eta=1.0, A=0.1)
    reports = [check_hypothesis(instance, name, params) for name in ready_hypotheses(params)]
    assert reports
    payload = json.loads(dumps_report(hypothesis_batch_to_dict(reports)))
    back = hypothesis_batch_from_dict(payload)
    assert [r.hypothesis for r in back] == [r.hypothesis for r in reports]
    assert [r.verdict for r in back] == [r.verdict for r in reports]
    assert [r.witness for r in back] == [r.witness for r in reports]


def test_verify_report_round_trip():
    frame = pd.DataFrame(
        [
            {"check": "matrix_symmetric", "module": "assembly", "status": "pass", "detail": "ok"},
            {"check": "sublevel_inside", "module": "solvers", "status": "skip", "detail": "-"},
            {"check": "rayleigh_bounds", "module": "spectral", "status": "fail", "detail": "x"},
        ]
    )
    payload = json.loads(dumps_report(verify_to_dict(frame)))
    assert payload["passed"] is False
    assert payload["counts"] == {"pass": 1, "fail": 1, "skip": 1}
    pd.testing.assert_frame_equal(verify_from_dict(payload), frame)


def test_verify_report_passes_with_skips():
    frame = pd.DataFrame(
        [{"check": "sublevel_inside", "module": "solvers", "status": "skip", "detail": "-"}]
    )
    assert verify_to_dict(frame)["passed"] is True
