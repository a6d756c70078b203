# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import numpy as np
import pytest
import scipy.stats

from drgmm.errors import DegenerateTestError, UnsupportedError
from drgmm.models import FactorData, crra_model, factor_model
from drgmm.moments import evaluate
from drgmm.solver import cue_estimate
from drgmm.stats import (
    CONDITIONAL_CALIBRATED,
    CONDITIONAL_POLICY,
    FIXED_POLICY,
    CriticalValuePolicy,
    build_result,
    clr_critical_values,
    conditional_cv,
    conditional_cv_array,
    conditional_lr,
    conditioning_statistic,
    drlm,
    drlm_value,
    gmm_ar,
    identification_statistic,
    j_statistic,
    klm,
    lr_value,
    rank_is_statistic,
    restricted_rank_quadratic_form,
    run_statistics,
)

from conftest import SeriesModel, manual_evaluation, random_series_model, raw_returns


def test_conditional_cv_values():
    assert conditional_cv(0.0) == pytest.approx(2.4)
    assert conditional_cv(250.0) == pytest.approx(3.84)
    assert conditional_cv(300.0) == 3.84
    # the calibrated function uses the integer part of r
    assert conditional_cv(10.7) == conditional_cv(10.0)
    grid = np.array([0.0, 0.5, 3.2, 10.0, 99.9, 250.0, 1e4])
    np.testing.assert_allclose(conditional_cv_array(grid), [conditional_cv(r) for r in grid])
    assert np.all(np.diff(conditional_cv_array(grid)) >= 0)


def test_policy_restrictions():
    with pytest.raises(UnsupportedError):
        CriticalValuePolicy(CONDITIONAL_CALIBRATED, alpha=0.1)
    with pytest.raises(UnsupportedError):
        CONDITIONAL_POLICY.critical_value(2, 10.0)
    with pytest.raises(UnsupportedError):
        conditional_cv(10.0, alpha=0.01)
    with pytest.raises(AssertionError):
        CriticalValuePolicy("bootstrap")
    assert FIXED_POLICY.critical_value(1) == pytest.approx(3.841458820694124)
    assert CriticalValuePolicy(alpha=0.1).critical_value(3) == pytest.approx(scipy.stats.chi2.isf(0.1, 3))


def test_build_result():
    result = build_result("klm", 5.0, 1, 3.84, tag="x", vector=np.ones(2))
    assert result.reject
    assert result.p_bound == pytest.approx(scipy.stats.chi2.sf(5.0, 1))
    as_dict = result.to_dict()
    assert as_dict["tag"] == "x"
    assert "vector" not in as_dict
    assert "conditioning_value" not in as_dict
    assert build_result("ar", -1e-14, 3, 7.8).value == 0.0


def test_drlm_bounded_by_klm(factor_iid, misspecified_factor, series_model):
    for model in (factor_iid, misspecified_factor, series_model):
        for theta in np.linspace(-3.0, 3.0, 13):
            ev = evaluate(model, [theta])
            assert drlm_value(ev) <= klm(ev).value * (1 + 1e-10) + 1e-12


def test_drlm_vanishes_at_cue(factor_iid, misspecified_factor, small_config):
    for model in (factor_iid, misspecified_factor):
        cue = cue_estimate(model, small_config).cue
        ev = evaluate(model, cue)
        assert drlm(ev).value < 1e-6
        assert klm(ev).value < 1e-6
        assert not drlm(ev).reject


def test_klm_equals_ar_when_moments_align_with_jacobian():
    V = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]])
    D = np.array([[1.0], [-0.5], [2.0]])
    ev = manual_evaluation(0.04 * D[:, 0], V, q_T=D, T=200)
    assert klm(ev).value == pytest.approx(gmm_ar(ev).value, rel=1e-12)
    assert gmm_ar(ev).df == 3


def test_degenerate_statistics():
    ev = manual_evaluation(np.zeros(3), np.eye(3), q_T=np.zeros((3, 1)))
    with pytest.raises(DegenerateTestError) as e:
        drlm(ev)
    assert e.value.exit_code == 3
    with pytest.raises(DegenerateTestError):
        klm(ev)


def test_statistics_invariant_to_linear_transformations():
    model = random_series_model(21, k=4, m=1)
    A = np.array([[2.0, 0.5, 0.0, 0.1], [0.0, 1.0, -0.3, 0.0], [0.4, 0.0, 3.0, 0.2], [0.0, 0.2, 0.0, 0.7]])
    transformed = SeriesModel(model.a @ A.T, np.einsum("ij,tjm->tim", A, model.b))
    for theta in (-1.5, 0.0, 0.8):
        original, moved = evaluate(model, [theta]), evaluate(transformed, [theta])
        for statistic in (drlm, klm, gmm_ar):
            assert statistic(moved).value == pytest.approx(statistic(original).value, rel=1e-8)
        assert identification_statistic(moved) == pytest.approx(identification_statistic(original), rel=1e-8)


def test_statistics_invariant_to_subtracted_asset(factor_data):
    R = raw_returns(factor_data)
    last = factor_model(FactorData(R, factor_data.F))
    first = factor_model(FactorData(R, factor_data.F, subtract_index=0))
    for theta in (-1.0, 0.3, 2.0):
        a, b = evaluate(last, [theta]), evaluate(first, [theta])
        for statistic in (drlm, klm, gmm_ar):
            assert statistic(a).value == pytest.approx(statistic(b).value, rel=1e-8)


def test_conditional_policy_uses_max_of_ar_and_identification(factor_iid):
    ev = evaluate(factor_iid, [0.2])
    result = drlm(ev, CONDITIONAL_POLICY)
    r = max(ev.scaled_objective, identification_statistic(ev))
    assert result.conditioning_value == pytest.approx(r)
    assert result.conditioning_value == pytest.approx(conditioning_statistic(ev))
    assert result.critical_value == pytest.approx(conditional_cv(r))
    assert result.policy == CONDITIONAL_CALIBRATED
    assert result.value == drlm(ev).value


def test_j_statistic_matches_dense_grid(misspecified_factor, small_config):
    j = j_statistic(misspecified_factor, small_config)
    assert j.df == misspecified_factor.k_f - 1
    dense = min(evaluate(misspecified_factor, [t]).scaled_objective for t in np.linspace(-20.0, 20.0, 4001))
    assert j.value <= dense + 1e-8
    assert j.extras["exhaustive"]


def test_rank_statistic_single_factor(factor_iid):
    result = rank_is_statistic(factor_iid)
    beta, omega = factor_iid.beta[:, 0], factor_iid.omega
    expected = factor_iid.T * factor_iid.q_ff[0, 0] * beta @ np.linalg.solve(omega, beta)
    assert result.value == pytest.approx(expected, rel=1e-10)
    assert result.df == factor_iid.k_f
    assert result.extras["f_statistic"] == pytest.approx(expected / factor_iid.k_f)


def test_rank_statistic_two_factors(two_factor):
    result = rank_is_statistic(two_factor)
    assert result.df == two_factor.k_f - 1
    direction = result.extras["direction"]
    assert np.linalg.norm(direction) == pytest.approx(1.0)
    # the minimum is below the quadratic form along each axis
    jacobian, covariance = two_factor.rank_inputs()
    for axis in np.eye(2):
        assert result.value <= restricted_rank_quadratic_form(jacobian, covariance, axis, two_factor.T) * (1 + 1e-6)


def test_rank_statistic_needs_linear_model(crra_sample, crra_params):
    with pytest.raises(UnsupportedError):
        rank_is_statistic(crra_model(*crra_sample, crra_params.delta0))


def test_lr_value_limits():
    assert lr_value(12.0, 3.0, 0.0) == pytest.approx(12.0)
    assert lr_value(12.0, 3.0, 1e7) == pytest.approx(3.0, rel=1e-5)
    assert lr_value(5.0, 5.0, 40.0) == pytest.approx(5.0)


def test_clr_critical_values():
    k = 5
    strong, none = clr_critical_values([1e6, 0.0], k)
    assert strong == pytest.approx(scipy.stats.chi2.isf(0.05, 1), abs=0.25)
    assert none == pytest.approx(scipy.stats.chi2.isf(0.05, k), rel=0.05)
    values = clr_critical_values(np.array([0.0, 5.0, 20.0, 100.0, 1000.0]), k)
    assert np.all(np.diff(values) <= 1e-12)
    # interpolated path for long inputs
    many = np.linspace(0.0, 50.0, 400)
    np.testing.assert_allclose(clr_critical_values(many, k)[::57], clr_critical_values(many[::57], k), atol=0.05)


def test_conditional_lr(factor_iid, two_factor):
    ev = evaluate(factor_iid, [0.3])
    result = conditional_lr(ev)
    assert result.df == 1
    assert result.conditioning_value == pytest.approx(identification_statistic(ev))
    assert result.value == pytest.approx(lr_value(ev.scaled_objective, klm(ev).value, result.conditioning_value))
    assert conditional_lr(ev, rank_stat=0.0).value == pytest.approx(ev.scaled_objective)
    with pytest.raises(UnsupportedError):
        conditional_lr(evaluate(two_factor, [0.5, -0.3]))


def test_run_statistics(factor_iid):
    ev = evaluate(factor_iid, [0.1])
    results = run_statistics(ev, ("drlm", "klm", "ar", "lr"), CONDITIONAL_POLICY)
    assert [r.name for r in results] == ["drlm", "klm", "ar", "lr"]
    assert results[0].policy == CONDITIONAL_CALIBRATED
    assert results[1].critical_value == pytest.approx(3.841458820694124)
    with pytest.raises(AssertionError):
        run_statistics(ev, ("wald",))


def test_two_parameter_statistics(two_factor):
    ev = evaluate(two_factor, [0.4, -0.2])
    assert drlm(ev).df == 2
    assert drlm(ev).critical_value == pytest.approx(scipy.stats.chi2.isf(0.05, 2))
    assert drlm(ev).value <= klm(ev).value * (1 + 1e-10)
    with pytest.raises(UnsupportedError):
        drlm(ev, CONDITIONAL_POLICY)
