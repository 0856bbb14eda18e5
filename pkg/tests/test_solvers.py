import numpy as np
import pytest

from tests.conftest import make_instance
from weighted_bvp.errors import (
    EmptySweep,
    EndpointNotBelowZero,
    InvalidParameter,
    MaxItersExceeded,
    SingularJacobian,
)
from weighted_bvp.services.assembly import assemble_M
from weighted_bvp.services.grid_problem import (
    GridFunction,
    random_weight_grid,
    uniform_weight_grid,
)
from weighted_bvp.services.regimes import threshold_lambda_star
from weighted_bvp.services.solvers import (
    MountainPassOptions,
    SolveOptions,
    SublevelOptions,
    check_lambda,
    find_negative_endpoint,
    minimize_global,
    minimize_sublevel,
    mountain_pass,
    newton_refine,
    solve,
    sweep_lambda,
)
from weighted_bvp.services.spectral import eigen_extremes

ROOT_TWO = np.sqrt(2.0)


@pytest.fixture
def cubic_1d(single_grid):
    return make_instance(single_grid, "cubic_softening")


@pytest.fixture
def quartic_1d(single_grid):
    return make_instance(single_grid, "rational_quartic")


@pytest.fixture
def power_1d(single_grid):
    return make_instance(single_grid, "power", {"s": 1.5, "gamma": 1.5})


@pytest.mark.parametrize("bad", [-1.0, 0.0, np.nan, np.inf])
def test_lambda_must_be_positive(bad):
    with pytest.raises(InvalidParameter, match="lambda must be positive"):
        check_lambda(bad)


def test_zero_lambda_only_when_allowed():
    assert check_lambda(0.0, allow_zero=True) == 0.0


def test_options_are_validated():
    with pytest.raises(InvalidParameter):
        SolveOptions(armijo_c=1.5)
    with pytest.raises(InvalidParameter):
        SolveOptions(max_iters=0)
    with pytest.raises(InvalidParameter):
        MountainPassOptions(path_points=2)
    with pytest.raises(InvalidParameter):
        SublevelOptions(alpha=-1.0, lambda_min=2.0)


@pytest.mark.parametrize(
    "lam, expected_abs, expected_energy", [(2.0, 1.0, -0.5), (3.0, 2.0 / np.sqrt(3.0), -4.0 / 3.0)]
)
def test_global_minimum_in_one_dimension(cubic_1d, lam, expected_abs, expected_energy):
    report = minimize_global(cubic_1d, lam)
    assert report.converged
    assert report.nontrivial
    assert report.residual_inf <= 1e-10
    assert report.max_abs == pytest.approx(expected_abs, abs=1e-9)
    assert report.energy.total == pytest.approx(expected_energy, abs=1e-12)
    assert report.method == "global_min"


def test_global_minimum_is_trivial_for_small_lambda(cubic_1d):
    report = minimize_global(cubic_1d, 0.01)
    assert report.converged
    assert not report.nontrivial
    assert report.energy.total == pytest.approx(0.0, abs=1e-15)


def test_global_minimum_is_deterministic(unit_grid):
    instance = make_instance(unit_grid, "cubic_softening")
    first = minimize_global(instance, 3.0, SolveOptions(seed=7))
    second = minimize_global(instance, 3.0, SolveOptions(seed=7))
    assert first.U.flat.tolist() == second.U.flat.tolist()
    assert first.iterations == second.iterations


def test_global_minimum_prefers_lower_energy_over_convergence():
    # one descent step: the zero start converges trivially, the random starts do not
    instance = make_instance(uniform_weight_grid(3, 3), "cubic_softening")
    opts = SolveOptions(max_iters=1, restarts=3, seed=0, handoff_tol=1e-300, newton_max_iters=1)
    report = minimize_global(instance, 3.0, opts)
    assert report.extras["start"] != "zero"
    assert report.energy.total < 0
    assert not report.converged


def test_global_trace_is_recorded(cubic_1d):
    report = minimize_global(cubic_1d, 2.0, SolveOptions(record_trace=True, restarts=1))
    assert report.trace
    assert all(len(row) == 3 for row in report.trace)


def test_sublevel_minimum_in_one_dimension(power_1d):
    sub = SublevelOptions(alpha=1.0, lambda_min=2.0)
    assert sub.r == 1.0
    report = minimize_sublevel(power_1d, 0.5, sub)
    assert report.converged
    assert report.nontrivial
    assert report.max_abs == pytest.approx(9.0 / 64.0, abs=1e-9)
    assert report.energy.total == pytest.approx(-27.0 / 4096.0, abs=1e-12)
    assert report.extras["inside_sublevel"]


def test_sublevel_minimum_at_zero_lambda(power_1d):
    report = minimize_sublevel(power_1d, 0.0, SublevelOptions(alpha=1.0, lambda_min=2.0))
    assert not report.nontrivial
    assert report.max_abs == pytest.approx(0.0, abs=1e-12)


def test_sublevel_minimum_below_threshold(unit_grid):
    instance = make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})
    spectrum = eigen_extremes(assemble_M(unit_grid))
    lam_star = threshold_lambda_star(instance, spectrum, 1.0)
    report = minimize_sublevel(
        instance, 0.9 * lam_star, SublevelOptions.from_spectrum(1.0, spectrum)
    )
    assert report.nontrivial
    assert report.energy.total < 0
    assert report.residual_inf <= 1e-8
    assert report.extras["phi"] < report.extras["r"]


def test_mountain_pass_in_one_dimension(quartic_1d):
    mp = MountainPassOptions(endpoint=GridFunction.constant(1, 1, 10.0))
    report = mountain_pass(quartic_1d, 2.0, mp)
    assert report.converged
    assert report.max_abs == pytest.approx(np.sqrt(ROOT_TWO - 1.0), abs=1e-9)
    assert report.energy.total == pytest.approx(3.0 - 2.0 * ROOT_TWO, abs=1e-10)
    assert report.extras["endpoint_energy"] < 0


def test_mountain_pass_rejects_positive_endpoint(quartic_1d):
    mp = MountainPassOptions(endpoint=GridFunction.constant(1, 1, 0.1))
    with pytest.raises(EndpointNotBelowZero):
        mountain_pass(quartic_1d, 2.0, mp)


def test_mountain_pass_on_unit_grid(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    report = mountain_pass(instance, 3.0)
    assert report.converged
    assert report.nontrivial
    assert report.residual_inf <= 1e-8
    assert report.energy.total > 0


def test_mountain_pass_on_random_grids_stays_on_the_ridge():
    rng = np.random.default_rng(7)
    mp = MountainPassOptions(path_points=32, deform_steps=500)
    opts = SolveOptions(seed=7)
    for _ in range(10):
        m, n = (int(v) for v in rng.integers(1, 4, size=2))
        grid = random_weight_grid(m, n, rng)
        instance = make_instance(grid, "power", {"s": 1.0, "gamma": 3.0})
        report = mountain_pass(instance, float(rng.uniform(0.5, 5.0)), mp, opts)
        assert report.extras["path_states"] <= 4 * 32
        if report.converged:
            assert report.nontrivial
            assert report.energy.total >= -10 * opts.grad_tol
            assert report.extras["path_max_energy"] > 0
        else:
            with pytest.raises(MaxItersExceeded):
                report.raise_for_convergence()


def test_mountain_pass_path_keeps_a_positive_maximum(unit_grid):
    instance = make_instance(unit_grid, "power", {"s": 1.0, "gamma": 3.0})
    report = mountain_pass(instance, 2.0)
    assert report.extras["path_max_energy"] > 0
    assert report.converged
    assert report.nontrivial
    assert report.energy.total > 0


def test_negative_endpoint_is_found(quartic_1d):
    endpoint = find_negative_endpoint(quartic_1d, 2.0, direction=GridFunction.constant(1, 1, 1.0))
    assert endpoint.at(1, 1) > 0
    M = assemble_M(quartic_1d.grid)
    u = endpoint.at(1, 1)
    assert 0.5 * M.quadratic_form(np.array([u])) - 2.0 * u**4 / (1 + u**2) < 0


def test_negative_endpoint_missing_for_coercive_energy(cubic_1d):
    with pytest.raises(EndpointNotBelowZero):
        find_negative_endpoint(cubic_1d, 0.01, max_doublings=10)


def test_newton_converges_to_closed_form_root(cubic_1d):
    report = newton_refine(cubic_1d, 2.0, GridFunction.constant(1, 1, 0.8))
    assert report.converged
    assert abs(report.U.at(1, 1) - 1.0) <= 1e-12


def test_newton_keeps_exact_solution(cubic_1d):
    report = newton_refine(cubic_1d, 2.0, GridFunction.constant(1, 1, 1.0))
    assert report.converged
    assert report.iterations <= 1
    assert abs(report.U.at(1, 1) - 1.0) <= 1e-12


def test_newton_reports_singular_jacobian(unit_grid):
    # M - 3 I is singular on the unit grid since 3 is an eigenvalue of M
    instance = make_instance(unit_grid, "linear", {"slope": 3.0})
    with pytest.raises(SingularJacobian):
        newton_refine(instance, 1.0, GridFunction.constant(2, 2, 0.5))


def test_solve_dispatches_methods(cubic_1d, power_1d):
    assert solve(cubic_1d, 2.0).method == "global_min"
    assert solve(cubic_1d, 2.0, method="newton").U.at(1, 1) == pytest.approx(1.0)
    report = solve(power_1d, 0.5, method="sublevel_min", alpha=1.0)
    assert report.max_abs == pytest.approx(9.0 / 64.0, abs=1e-9)


def test_solve_requires_alpha_for_sublevel(power_1d):
    with pytest.raises(InvalidParameter):
        solve(power_1d, 0.5, method="sublevel_min")


def test_solve_rejects_unknown_method(cubic_1d):
    with pytest.raises(InvalidParameter):
        solve(cubic_1d, 2.0, method="bisection")


def test_unconverged_report_raises(cubic_1d):
    report = newton_refine(
        cubic_1d, 2.0, GridFunction.constant(1, 1, 0.8), SolveOptions(newton_max_iters=1)
    )
    assert not report.converged
    with pytest.raises(MaxItersExceeded) as excinfo:
        report.raise_for_convergence()
    assert excinfo.value.report is report


def test_sweep_follows_closed_form(cubic_1d):
    entries = sweep_lambda(cubic_1d, [1.5, 2.0, 3.0])
    assert [entry.lam for entry in entries] == [1.5, 2.0, 3.0]
    for entry in entries:
        assert entry.error is None
        assert entry.report.converged
        expected = np.sqrt(2.0 * (entry.lam - 1.0) / entry.lam)
        assert entry.report.max_abs == pytest.approx(expected, abs=1e-9)


def test_threaded_sweep_matches_sequential(cubic_1d):
    sequential = sweep_lambda(cubic_1d, [1.5, 2.0, 3.0])
    threaded = sweep_lambda(cubic_1d, [1.5, 2.0, 3.0], threads=3)
    for a, b in zip(sequential, threaded):
        assert a.lam == b.lam
        assert a.report.max_abs == pytest.approx(b.report.max_abs, abs=1e-9)


def test_sweep_records_entry_errors(quartic_1d):
    # the endpoint is negative at lambda = 2 only
    endpoint = GridFunction.constant(1, 1, 10.0)
    entries = sweep_lambda(quartic_1d, [0.1, 2.0], method="mountain_pass", endpoint=endpoint)
    assert entries[0].report is None
    assert entries[0].error.startswith("EndpointNotBelowZero")
    assert entries[1].report.converged


def test_empty_sweep(cubic_1d):
    with pytest.raises(EmptySweep):
        sweep_lambda(cubic_1d, [])


def test_sweep_needs_ascending_lambdas(cubic_1d):
    with pytest.raises(InvalidParameter):
        sweep_lambda(cubic_1d, [2.0, 1.5])
