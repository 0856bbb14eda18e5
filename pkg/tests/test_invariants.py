import numpy as np
import pytest

from tests.conftest import make_instance
from weighted_bvp.errors import InvalidParameter
from weighted_bvp.services import invariants
from weighted_bvp.services.grid_problem import GridFunction
from weighted_bvp.services.invariants import STATUSES, failed_checks, run_invariants
from weighted_bvp.services.problem_io import load_problem_file
from weighted_bvp.services.solvers import SolveReport


@pytest.mark.parametrize("name", ["unit2x2.json", "unit2x2_quartic.json", "unit2x2_power.json"])
def test_no_invariant_fails_on_fixtures(fixtures_dir, name):
    problem = load_problem_file(fixtures_dir / name)
    frame = run_invariants(problem.instance, lam=problem.lam, params=problem.hypotheses, seed=3)
    assert list(frame.columns) == ["check", "module", "status", "detail"]
    assert len(frame) == len(invariants.CHECKS)
    assert set(frame["status"]) <= set(STATUSES)
    assert not failed_checks(frame), frame.loc[frame["status"] == "fail"].to_dict(orient="records")


def test_invariants_cover_every_module(fixtures_dir):
    problem = load_problem_file(fixtures_dir / "unit2x2.json")
    frame = run_invariants(problem.instance, lam=2.0, samples=5)
    modules = {"grid_problem", "assembly", "spectral", "energy", "solvers", "regimes"}
    assert set(frame["module"]) == modules


def test_solver_checks_are_listed():
    names = [name for name, _, _ in invariants.CHECKS]
    for name in (
        "rayleigh_bounds",
        "mountain_pass_nonnegative",
        "sublevel_inside",
        "sweep_nontriviality",
    ):
        assert name in names


def test_sublevel_ratio_check_uses_alpha(fixtures_dir):
    problem = load_problem_file(fixtures_dir / "unit2x2_power.json")
    frame = run_invariants(problem.instance, lam=0.05, params=problem.hypotheses, samples=5)
    rows = frame.set_index("check")
    assert rows.loc["sublevel_ratio_reciprocal", "status"] == "pass"
    assert "ratio bound" in rows.loc["sublevel_ratio_reciprocal", "detail"]
    assert rows.loc["sublevel_inside", "status"] == "pass"


def test_checks_without_alpha_are_skipped(fixtures_dir):
    problem = load_problem_file(fixtures_dir / "unit2x2.json")
    frame = run_invariants(problem.instance, lam=2.0, samples=5).set_index("check")
    assert frame.loc["sublevel_inside", "status"] == "skip"
    assert frame.loc["sublevel_ratio_reciprocal", "status"] == "skip"


def test_mountain_pass_check_skips_without_a_local_minimum(fixtures_dir):
    # 2 t - t^3 at lambda = 2 makes 0 a saddle of the energy
    problem = load_problem_file(fixtures_dir / "unit2x2.json")
    frame = run_invariants(problem.instance, lam=2.0, samples=5).set_index("check")
    assert frame.loc["mountain_pass_nonnegative", "status"] == "skip"
    assert "local minimum" in frame.loc["mountain_pass_nonnegative", "detail"]


def test_coercive_endpoint_check_requires_growth(unit_grid):
    instance = make_instance(unit_grid, "cubic_softening")
    frame = run_invariants(instance, lam=0.01, samples=5).set_index("check")
    assert frame.loc["negative_endpoint", "status"] == "pass"
    assert "no negative energy" in frame.loc["negative_endpoint", "detail"]


def test_unconverged_global_minimum_fails(unit_grid, monkeypatch):
    instance = make_instance(unit_grid, "cubic_softening")
    real = invariants.minimize_global

    def stalled(*args, **kwargs):
        report = real(*args, **kwargs)
        values = np.full((2, 2), 0.3)
        return SolveReport(
            U=GridFunction.from_values(values),
            method=report.method,
            lam=report.lam,
            residual_inf=1.0,
            energy=report.energy,
            iterations=1,
            converged=False,
            nontrivial=True,
        )

    monkeypatch.setattr(invariants, "minimize_global", stalled)
    frame = run_invariants(instance, lam=2.0, samples=2).set_index("check")
    assert frame.loc["converged_residual", "status"] == "fail"
    assert "did not converge" in frame.loc["converged_residual", "detail"]


def test_unbounded_energy_is_skipped_not_passed(unit_grid, monkeypatch):
    # slope 3 exceeds lambda_min = 3 - sqrt(5), so I falls without bound along low modes
    instance = make_instance(unit_grid, "linear", {"slope": 3.0})
    real = invariants.minimize_global

    def runaway(*args, **kwargs):
        report = real(*args, **kwargs)
        return SolveReport(
            U=GridFunction.constant(2, 2, 1e3),
            method=report.method,
            lam=report.lam,
            residual_inf=1e3,
            energy=report.energy,
            iterations=1,
            converged=False,
            nontrivial=True,
        )

    monkeypatch.setattr(invariants, "minimize_global", runaway)
    frame = run_invariants(instance, lam=1.0, samples=2).set_index("check")
    assert frame.loc["converged_residual", "status"] == "skip"
    assert "not bounded below" in frame.loc["converged_residual", "detail"]


def test_failing_check_is_reported(fixtures_dir, monkeypatch):
    def broken(ctx):
        raise InvalidParameter("broken on purpose")

    monkeypatch.setattr(invariants, "CHECKS", [("broken", "assembly", broken)])
    problem = load_problem_file(fixtures_dir / "unit2x2.json")
    frame = run_invariants(problem.instance, samples=1)
    assert frame["status"].tolist() == ["fail"]
    assert frame["detail"][0] == "InvalidParameter: broken on purpose"
    assert failed_checks(frame) == ["broken"]
