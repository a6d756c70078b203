# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import numpy as np
import pytest

from drgmm.errors import StructureViolationError, UnsupportedError
from drgmm.models import crra_model, factor_model
from drgmm.moments import evaluate, numerical_derivative
from drgmm.solver import (
    SolverConfig,
    atan_scale,
    char_poly,
    constant_sum,
    constant_sum_value,
    cue_estimate,
    drlm_derivative,
    drlm_derivative_kronecker,
    drlm_maximizers,
    enhancement_path,
    factor_pseudo_true,
    power_enhanced_test,
    psi_grid,
    to_psi,
    to_theta,
)
from drgmm.stats import CONDITIONAL_POLICY, FIXED_POLICY, drlm, drlm_value, j_statistic

from conftest import make_factor_data, random_series_model


def _char_poly(model):
    return char_poly(model.mean_returns, model.beta, model.omega, model.q_ff)


def test_solver_config_validation():
    with pytest.raises(AssertionError):
        SolverConfig(grid_size=5)
    with pytest.raises(AssertionError):
        SolverConfig(scale=-1.0)
    assert atan_scale(None, SolverConfig(scale=3.0)) == 3.0


def test_psi_grid_stays_inside_half_turn():
    grid = psi_grid(11)
    assert grid.shape == (11,)
    assert np.all(np.abs(grid) < np.pi / 2)
    np.testing.assert_allclose(to_psi(to_theta(grid, 4.0), 4.0), grid)


def test_cue_matches_char_poly(factor_iid, misspecified_factor, small_config):
    for model in (factor_iid, misspecified_factor):
        solution = _char_poly(model)
        points = cue_estimate(model, small_config)
        assert not points.at_infinity
        np.testing.assert_allclose(points.cue, solution.argmins[0], rtol=1e-6)
        assert points.objective_at_cue == pytest.approx(solution.roots[0], rel=1e-8)
        assert j_statistic(model, small_config).value == pytest.approx(model.T * solution.roots[0], rel=1e-8)


def test_cue_reports_other_stationary_point(factor_iid, small_config):
    # the second root of the characteristic polynomial is the maximum of the objective
    solution = _char_poly(factor_iid)
    points = cue_estimate(factor_iid, small_config)
    maxima = [p for p in points.other_points if p.kind == "max"]
    assert len(maxima) == 1
    np.testing.assert_allclose(maxima[0].theta, solution.argmins[1], rtol=1e-6)


def test_two_factor_cue_matches_char_poly(two_factor, small_config):
    solution = _char_poly(two_factor)
    points = cue_estimate(two_factor, small_config)
    assert points.exhaustive
    np.testing.assert_allclose(points.cue, solution.argmins[0], rtol=1e-5)
    assert points.objective_at_cue == pytest.approx(solution.roots[0], rel=1e-8)


def test_cue_of_useless_factor():
    # betas are pure estimation noise, the minimum may sit far out or at infinity
    data = make_factor_data(41, beta_scale=0.0, premia=[0.0], misspecification=0.5)
    model = factor_model(data)
    solution = _char_poly(model)
    points = cue_estimate(model, SolverConfig(grid_size=401))
    assert points.objective_at_cue == pytest.approx(solution.roots[0], rel=1e-3)


def test_multistart_for_three_parameters():
    model = factor_model(make_factor_data(42, N=10, m=3, premia=[0.5, 0.2, -0.1]))
    points = cue_estimate(model, SolverConfig(multistart=4))
    assert not points.exhaustive
    solution = _char_poly(model)
    assert points.objective_at_cue == pytest.approx(solution.roots[0], rel=1e-6)


def test_char_poly_without_beta():
    rng = np.random.default_rng(0)
    mu = rng.standard_normal(4)
    omega = np.diag(rng.uniform(0.5, 2.0, 4))
    solution = char_poly(mu, np.zeros(4), omega, np.eye(1))
    np.testing.assert_allclose(solution.roots, sorted([0.0, mu @ np.linalg.solve(omega, mu)]), atol=1e-12)
    assert np.all(np.isinf(solution.argmins[0]))

    pseudo = factor_pseudo_true(mu, np.zeros(4), omega, np.eye(1))
    assert pseudo.is_measure == 0.0
    assert not pseudo.structural_ok


def test_factor_pseudo_true_correct_specification():
    rng = np.random.default_rng(1)
    beta = rng.uniform(0.5, 1.5, 6)
    omega = np.eye(6) + 0.2
    pseudo = factor_pseudo_true(0.7 * beta, beta, omega, 2.0)
    assert pseudo.lambda_star[0] == pytest.approx(0.7)
    assert pseudo.min_obj == pytest.approx(0.0, abs=1e-12)
    assert pseudo.is_measure == pytest.approx(2.0 * beta @ np.linalg.solve(omega, beta))
    assert pseudo.structural_ok


def test_drlm_derivative_matches_finite_differences(factor_iid, misspecified_factor, series_model):
    for model in (factor_iid, misspecified_factor, series_model):
        for theta in (-2.0, 0.1, 1.7):
            ev = evaluate(model, [theta])
            fd = numerical_derivative(lambda t: drlm_value(evaluate(model, t)), np.array([theta]))
            scale = max(1.0, drlm_value(ev))
            np.testing.assert_allclose(drlm_derivative(ev, model), fd, rtol=1e-3, atol=1e-6 * scale)


def test_kronecker_derivative_matches_general_form(factor_iid, misspecified_factor):
    for model in (factor_iid, misspecified_factor):
        for theta in (-1.0, 0.4, 3.0):
            ev = evaluate(model, [theta])
            atol = 1e-9 * max(1.0, drlm_value(ev))
            np.testing.assert_allclose(drlm_derivative_kronecker(ev), drlm_derivative(ev, model), rtol=1e-6, atol=atol)


def test_drlm_derivative_restrictions(two_factor, crra_sample, crra_params):
    with pytest.raises(UnsupportedError):
        drlm_derivative(evaluate(two_factor, [0.1, 0.2]))
    crra = crra_model(*crra_sample, crra_params.delta0)
    with pytest.raises(UnsupportedError):
        drlm_derivative(evaluate(crra, [15.0]), crra)


def test_constant_sum(factor_iid):
    d = constant_sum(factor_iid)
    mu, beta, omega = factor_iid.mean_returns, factor_iid.beta[:, 0], factor_iid.omega
    expected = factor_iid.T * (
        mu @ np.linalg.solve(omega, mu) + factor_iid.q_ff[0, 0] * beta @ np.linalg.solve(omega, beta)
    )
    assert d == pytest.approx(expected, rel=1e-8)
    for theta in (-50.0, -1.0, 0.0, 2.5, 1e3):
        assert constant_sum_value(evaluate(factor_iid, [theta])) == pytest.approx(d, rel=1e-8)


def test_constant_sum_fails_without_kronecker_structure():
    model = factor_model(make_factor_data(11), iid=False)
    with pytest.raises(StructureViolationError):
        constant_sum(model)


def test_drlm_maximizers(factor_iid, misspecified_factor):
    for model in (factor_iid, misspecified_factor):
        d = constant_sum(model)
        maximizers = drlm_maximizers(model)
        assert len(maximizers) == 2
        grid_max = max(drlm_value(evaluate(model, [t])) for t in np.linspace(-30.0, 30.0, 3001))
        for theta in maximizers:
            ev = evaluate(model, [theta])
            assert ev.scaled_objective == pytest.approx(d / 2, rel=1e-8)
            assert drlm_value(ev) >= grid_max * (1 - 1e-9)


def test_drlm_maximizers_restrictions(two_factor, series_model):
    with pytest.raises(UnsupportedError):
        drlm_maximizers(two_factor)
    with pytest.raises(UnsupportedError):
        drlm_maximizers(series_model)


def test_enhancement_path():
    path = enhancement_path(np.array([-3.0]), np.array([2.0]), 5.0, 11)
    assert path.shape == (11, 1)
    assert path[0, 0] == pytest.approx(-3.0)
    assert path[-1, 0] == pytest.approx(2.0)
    assert np.all(np.diff(path[:, 0]) > 0)

    straight = enhancement_path(np.array([0.0, 1.0]), np.array([2.0, -1.0]), 5.0, 5)
    np.testing.assert_allclose(straight[2], [1.0, 0.0])

    towards_infinity = enhancement_path(np.array([1.0]), np.array([np.inf]), 5.0, 5)
    assert np.all(np.isfinite(towards_infinity))


def test_power_enhanced_test(misspecified_factor, small_config):
    points = cue_estimate(misspecified_factor, small_config)
    at_cue = power_enhanced_test(misspecified_factor, points.cue, FIXED_POLICY, cue=points.cue, config=small_config)
    assert not at_cue.reject
    assert at_cue.name == "drlm_enhanced"

    for theta in (-8.0, -2.0, 0.5, 4.0, 20.0):
        plain = drlm(evaluate(misspecified_factor, [theta]), CONDITIONAL_POLICY)
        enhanced = power_enhanced_test(misspecified_factor, [theta], cue=points.cue, config=small_config, points=51)
        assert enhanced.extras["theta1_value"] == pytest.approx(plain.value)
        assert enhanced.extras["theta1_critical_value"] == pytest.approx(plain.critical_value)
        assert enhanced.reject >= plain.reject
        assert enhanced.value - enhanced.critical_value >= plain.value - plain.critical_value - 1e-12


def test_power_enhanced_rejects_beyond_the_maximizer(factor_iid, small_config):
    # past a DRLM maximizer seen from the CUE, the maximum on the segment is at least the maximizer value
    cue = cue_estimate(factor_iid, small_config).cue
    maximizers = drlm_maximizers(factor_iid)
    far = [m for m in maximizers if abs(m - cue[0]) > 0][0]
    theta1 = far + 3.0 * np.sign(far - cue[0])
    enhanced = power_enhanced_test(factor_iid, [theta1], FIXED_POLICY, cue=cue, config=small_config)
    peak = drlm_value(evaluate(factor_iid, [far]))
    assert enhanced.value >= peak * (1 - 1e-9) or enhanced.extras["theta1_value"] >= peak * (1 - 1e-9)


def test_power_enhanced_for_general_models(small_config):
    model = random_series_model(4)
    result = power_enhanced_test(model, [5.0], FIXED_POLICY, config=small_config, points=41)
    assert result.value >= result.extras["theta1_value"] - 1e-12
