import numpy as np
import pytest

from tests.conftest import SQRT5, make_instance
from weighted_bvp.errors import InvalidParameter, NonpositiveDenominator, RangeInvalid
from weighted_bvp.services.assembly import assemble_M
from weighted_bvp.services.regimes import (
    HypothesisParams,
    check_hypothesis,
    coercivity_profile,
    hypothesis_name,
    ready_hypotheses,
    regime_report,
    sphere_energy_floor,
    sublevel_ratio_bound,
    threshold_lambda_star,
    thresholds,
)
from weighted_bvp.services.spectral import eigen_extremes

LOWER_BOUND_PARAMS = {
    "alpha_table": [[1.0, 1.0], [1.0, 1.0]],
    "beta_table": [[-1.0, -1.0], [-1.0, -1.0]],
    "M_cut": 1.0,
}


@pytest.fixture
def unit_spectrum(unit_grid):
    return eigen_extremes(assemble_M(unit_grid))


@pytest.fixture
def power_2x2(unit_grid):
    return make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})


def test_lambda_star_single_node(single_grid):
    instance = make_instance(single_grid, "power", {"s": 1.5, "gamma": 1.5})
    spectrum = eigen_extremes(assemble_M(single_grid))
    assert threshold_lambda_star(instance, spectrum, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_lambda_star_unit_grid(power_2x2, unit_spectrum):
    lam_star = threshold_lambda_star(power_2x2, unit_spectrum, 1.0)
    assert lam_star == pytest.approx((3.0 - SQRT5) / 8.0, abs=1e-12)


def test_lambda_star_is_reciprocal_of_ratio_bound(power_2x2, unit_spectrum):
    lam_star = threshold_lambda_star(power_2x2, unit_spectrum, 0.7)
    assert lam_star * sublevel_ratio_bound(power_2x2, unit_spectrum, 0.7) == pytest.approx(1.0)


def test_lambda_star_undefined_for_nonpositive_primitive(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "damped_quadratic")
    with pytest.raises(NonpositiveDenominator):
        threshold_lambda_star(instance, unit_spectrum, 1.0)


def test_lambda_star_respects_negative_coefficients(unit_grid, unit_spectrum):
    coefficient = np.array([[1.0, 1.0], [1.0, -1.0]])
    instance = make_instance(unit_grid, "linear", {"slope": 2.0}, coefficient=coefficient)
    # node maxima of +-t^2 on [-1, 1] are 1, 1, 1 and 0
    lam_star = threshold_lambda_star(instance, unit_spectrum, 1.0)
    assert lam_star == pytest.approx((3.0 - SQRT5) / 6.0, abs=1e-10)


def test_threshold_report(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "cubic_softening")
    params = HypothesisParams(c=0.5, A=0.1, alpha_table=LOWER_BOUND_PARAMS["alpha_table"])
    report = thresholds(instance, unit_spectrum, params)
    assert report.negative_well_lower == pytest.approx(3.0 + SQRT5)
    assert report.bounded_growth_upper == pytest.approx(3.819660, abs=1e-6)
    assert report.mountain_pass_lower == pytest.approx(2.618034, abs=1e-6)
    assert report.sublevel_upper is None
    assert report.interval("mountain_pass") == (pytest.approx(2.618034, abs=1e-6), np.inf)
    assert report.interval("sublevel") is None


def test_threshold_report_notes_undefined_lambda_star(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "damped_quadratic")
    report = thresholds(instance, unit_spectrum, HypothesisParams(alpha=1.0))
    assert report.sublevel_upper is None
    assert len(report.notes) == 1


def test_thresholds_scale_with_weights(unit_grid, rng):
    params = HypothesisParams(c=0.5, A=0.1, alpha=1.0, **LOWER_BOUND_PARAMS)
    base_instance = make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})
    base = thresholds(base_instance, eigen_extremes(assemble_M(unit_grid)), params)
    for factor in rng.uniform(0.1, 10.0, size=5):
        grid = unit_grid.scaled(float(factor))
        scaled = thresholds(
            make_instance(grid, "power", {"s": 1.5, "gamma": 1.5}),
            eigen_extremes(assemble_M(grid)),
            params,
        )
        for name in (
            "sublevel_upper",
            "negative_well_lower",
            "bounded_growth_upper",
            "mountain_pass_lower",
        ):
            assert getattr(scaled, name) == pytest.approx(factor * getattr(base, name), rel=1e-8)


def test_hypothesis_params_validation():
    with pytest.raises(InvalidParameter):
        HypothesisParams(c=-1.0)
    with pytest.raises(InvalidParameter):
        HypothesisParams(alpha_growth=2.5)
    with pytest.raises(InvalidParameter) as excinfo:
        HypothesisParams.from_dict({"gamma": 1.0})
    assert excinfo.value.field == "gamma"


def test_hypothesis_params_dict_round_trip():
    params = HypothesisParams(c=0.5, eta=0.69, **LOWER_BOUND_PARAMS)
    again = HypothesisParams.from_dict(params.to_dict())
    assert again.to_dict() == params.to_dict()
    assert again.alpha_minus == 1.0
    assert again.beta_minus == -1.0


def test_hypothesis_aliases():
    assert hypothesis_name("H6") == "flat_at_zero"
    assert hypothesis_name("negative_well") == "negative_well"
    with pytest.raises(InvalidParameter):
        hypothesis_name("H7")


def test_ready_hypotheses():
    assert ready_hypotheses(HypothesisParams()) == ("steep_at_zero", "flat_at_zero")
    ready = ready_hypotheses(HypothesisParams(c=0.5, eta=0.69, A=0.1))
    assert "negative_well" in ready
    assert "positive_well" in ready
    assert "bounded_quadratic_ratio" in ready
    assert "subquadratic_growth" not in ready


def test_flat_at_zero_for_rational_quartic(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    report = check_hypothesis(instance, "H6", t_range=(1e-8, 1e-1))
    assert report.consistent
    assert report.evidence_only
    assert report.witness is None


def test_negative_well_for_damped_quadratic(unit_grid):
    instance = make_instance(unit_grid, "damped_quadratic")
    params = HypothesisParams(c=0.5, eta=0.69)
    report = check_hypothesis(instance, "negative_well", params)
    assert report.consistent
    assert not report.evidence_only


def test_negative_well_violated_past_log_two(unit_grid):
    instance = make_instance(unit_grid, "damped_quadratic")
    report = check_hypothesis(instance, "negative_well", HypothesisParams(c=0.5, eta=1.0))
    assert report.verdict == "violated"
    assert report.witness.t >= np.log(2.0) - 1e-3
    assert report.witness.node == (1, 1)


def test_steep_at_zero_for_power_kernel(unit_grid):
    instance = make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})
    report = check_hypothesis(instance, "steep_at_zero")
    assert report.consistent


def test_steep_at_zero_fails_for_quartic(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    report = check_hypothesis(instance, "steep_at_zero")
    assert report.verdict == "violated"
    assert report.witness.t == pytest.approx(1e-8)


def test_quadratic_lower_bound_for_quartic(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    params = HypothesisParams(**LOWER_BOUND_PARAMS)
    assert check_hypothesis(instance, "quadratic_lower_bound", params).consistent


def test_bounded_quadratic_ratio(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    assert check_hypothesis(instance, "H4", HypothesisParams(A=1.5)).consistent
    assert not check_hypothesis(instance, "H4", HypothesisParams(A=0.5)).consistent


def test_subquadratic_growth(unit_grid):
    instance = make_instance(unit_grid, "power", {"s": 1.5, "gamma": 1.5})
    params = HypothesisParams(a=1.0, b=1e-9, T=1.0, alpha_growth=1.6)
    assert check_hypothesis(instance, "subquadratic_growth", params).consistent


def test_node_tables_must_match_the_grid(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "rational_quartic")
    params = HypothesisParams(alpha_table=[1.0, 2.0, 3.0], beta_table=[0.0], M_cut=1.0)
    with pytest.raises(InvalidParameter) as excinfo:
        check_hypothesis(instance, "quadratic_lower_bound", params)
    assert excinfo.value.field == "alpha_table"
    with pytest.raises(InvalidParameter) as excinfo:
        thresholds(instance, unit_spectrum, params)
    assert excinfo.value.field == "alpha_table"

    wide_beta = HypothesisParams(
        alpha_table=LOWER_BOUND_PARAMS["alpha_table"], beta_table=[[0.0, 0.0, 0.0]], M_cut=1.0
    )
    with pytest.raises(InvalidParameter) as excinfo:
        regime_report(instance, unit_spectrum, 3.0, wide_beta)
    assert excinfo.value.field == "beta_table"


def test_check_requires_parameters(unit_grid):
    instance = make_instance(unit_grid, "damped_quadratic")
    with pytest.raises(InvalidParameter):
        check_hypothesis(instance, "negative_well", HypothesisParams(eta=0.5))


@pytest.mark.parametrize("t_range", [(0.5, 0.1), (-1.0, 1.0), (0.0, np.inf)])
def test_invalid_ranges(unit_grid, t_range):
    instance = make_instance(unit_grid, "damped_quadratic")
    with pytest.raises(RangeInvalid):
        check_hypothesis(instance, "negative_well", HypothesisParams(c=0.5, eta=0.69), t_range)


def test_too_few_samples(unit_grid):
    instance = make_instance(unit_grid, "rational_quartic")
    with pytest.raises(RangeInvalid):
        check_hypothesis(instance, "flat_at_zero", samples=10)


def test_regime_recommends_sublevel(power_2x2, unit_spectrum):
    report = regime_report(power_2x2, unit_spectrum, 0.05, HypothesisParams(alpha=1.0))
    sublevel = next(v for v in report.mechanisms if v.mechanism == "sublevel")
    assert sublevel.contains_lambda
    assert sublevel.interval[1] == pytest.approx(0.0954915, abs=1e-7)
    assert sublevel.recommended_method == "sublevel_min"
    assert sublevel.hypotheses["steep_at_zero"] == "consistent"
    assert report.zero_is_solution


def test_regime_recommends_mountain_pass(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "rational_quartic")
    params = HypothesisParams(**LOWER_BOUND_PARAMS)
    report = regime_report(instance, unit_spectrum, 3.0, params)
    verdict = next(v for v in report.mechanisms if v.mechanism == "mountain_pass")
    assert verdict.contains_lambda
    assert verdict.recommended_method == "mountain_pass"
    assert verdict.hypotheses == {
        "quadratic_lower_bound": "consistent",
        "flat_at_zero": "consistent",
    }
    assert report.sphere_floor.min_energy > 0


def test_regime_outside_bounded_growth(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "rational_quartic")
    report = regime_report(instance, unit_spectrum, 10.0, HypothesisParams(A=0.1))
    verdict = next(v for v in report.mechanisms if v.mechanism == "bounded_growth")
    assert verdict.contains_lambda is False
    assert next(v for v in report.mechanisms if v.mechanism == "sublevel").interval is None


def test_regime_flags_nonzero_forcing(unit_grid, unit_spectrum):
    instance = make_instance(unit_grid, "tabulated", {"t_grid": [-5.0, 5.0], "values": [1.0, 1.0]})
    report = regime_report(instance, unit_spectrum, 1.0, HypothesisParams())
    assert not report.zero_is_solution


def test_coercivity_profile(unit_grid):
    instance = make_instance(unit_grid, "cubic_softening")
    M = assemble_M(unit_grid)
    profile = coercivity_profile(instance, M, 0.01, np.ones(4), [1.0, 10.0, 100.0])
    energies = [value for _, value in profile]
    assert [radius for radius, _ in profile] == [1.0, 10.0, 100.0]
    assert energies[0] < energies[1] < energies[2]
    with pytest.raises(InvalidParameter):
        coercivity_profile(instance, M, 0.01, np.zeros(4), [1.0])


def test_sphere_floor_sign(unit_grid):
    instance = make_instance(unit_grid, "cubic_softening")
    M = assemble_M(unit_grid)
    # lambda above lambda_min: some direction descends from 0
    assert sphere_energy_floor(instance, M, 3.0, 0.1).min_energy < 0
    assert sphere_energy_floor(instance, M, 0.1, 0.1).min_energy > 0
    with pytest.raises(InvalidParameter):
        sphere_energy_floor(instance, M, 0.1, 0.0)
