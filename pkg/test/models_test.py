# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import numpy as np
import pytest
import scipy.stats

from drgmm.errors import EvaluationError, InputError
from drgmm.models import (
    CrraDgpParams,
    FactorData,
    IvData,
    crra_dgp_sample,
    crra_model,
    crra_population,
    crra_population_objective,
    crra_pseudo_true,
    factor_model,
    first_stage_f,
    iv_char_poly,
    iv_model,
    load_crra_calibration,
)
from drgmm.moments import eicker_white, evaluate
from drgmm.stats import gmm_ar, j_statistic
from drgmm.solver import SolverConfig

from conftest import make_factor_data, make_iv_data, raw_returns


def test_factor_data_needs_more_periods_than_parameters():
    rng = np.random.default_rng(0)
    with pytest.raises(AssertionError):
        FactorData(rng.standard_normal((6, 5)), rng.standard_normal(6), excess=True)


def test_factor_data_reports_bad_row():
    rng = np.random.default_rng(0)
    R = rng.standard_normal((30, 4))
    R[11, 2] = np.nan
    with pytest.raises(InputError) as e:
        FactorData(R, rng.standard_normal(30))
    assert e.value.row == 12
    assert "row 12" in str(e.value)
    assert e.value.exit_code == 2


def test_raw_returns_subtract_last_column(factor_data):
    raw = FactorData(raw_returns(factor_data), factor_data.F)
    assert raw.N == factor_data.N
    np.testing.assert_allclose(raw.excess_returns(), factor_data.R, atol=1e-12)

    first = FactorData(raw.R, factor_data.F, subtract_index=0)
    np.testing.assert_allclose(first.excess_returns()[:, 0], raw.R[:, 1] - raw.R[:, 0])


def test_factor_closed_forms_match_eicker_white():
    model = factor_model(make_factor_data(31, T=20000, N=5))
    for lam in (0.0, 0.8, -2.0):
        theta = np.array([lam])
        closed = model.covariance(theta)
        robust = eicker_white(model.moment_series(theta), model.derivative_series(theta))
        for name in ("V_ff", "V_theta_f", "V_theta_theta"):
            a, b = getattr(closed, name), getattr(robust, name)
            assert np.linalg.norm(a - b) <= 0.05 * np.linalg.norm(robust.V_ff), name


def test_factor_premium_guess_is_cross_sectional_ols(factor_iid):
    guess = factor_iid.theta_guess()
    beta, mean = factor_iid.beta, factor_iid.mean_returns
    np.testing.assert_allclose(guess, np.linalg.solve(beta.T @ beta, beta.T @ mean))


def test_iv_data_needs_more_instruments():
    rng = np.random.default_rng(0)
    with pytest.raises(AssertionError):
        IvData(rng.standard_normal(50), rng.standard_normal((50, 2)), rng.standard_normal((50, 2)))


def test_iv_two_stage_least_squares_first_order_condition(iv_iid):
    theta = iv_iid.theta_guess()
    f_T, _ = iv_iid.sample_moments(theta)
    np.testing.assert_allclose(iv_iid.sigma_zx.T @ iv_iid.q_zz_inv @ f_T, 0.0, atol=1e-12)


def test_iv_controls_are_partialled_out():
    data = make_iv_data(4, controls=2)
    y, X, Z = data.partialled()
    exog = np.column_stack([np.ones(data.T), data.W])
    for a in (y[:, None], X, Z):
        np.testing.assert_allclose(exog.T @ a, 0.0, atol=1e-9)


def test_iv_variance_is_positive(iv_iid):
    for theta in np.linspace(-10.0, 10.0, 21):
        a = np.array([1.0, -theta])
        assert a @ iv_iid.omega @ a > 0
        assert np.all(np.linalg.eigvalsh(iv_iid.covariance(np.array([theta])).V_ff) > 0)


def test_iv_anderson_rubin_size():
    rejections = 0
    reps = 2000
    for rep in range(reps):
        model = iv_model(make_iv_data(1000 + rep, T=200, k=3, theta=1.0, strength=0.3))
        rejections += gmm_ar(evaluate(model, [1.0])).reject
    se = np.sqrt(0.05 * 0.95 / reps)
    assert abs(rejections / reps - 0.05) <= 3 * se + 0.005


def test_iv_char_poly_smallest_root_is_j(iv_iid):
    solution = iv_char_poly(iv_iid)
    j = j_statistic(iv_iid, SolverConfig(grid_size=801))
    assert j.value == pytest.approx(iv_iid.T * solution.roots[0], rel=1e-6)
    np.testing.assert_allclose(j.extras["cue"], solution.argmins[0], rtol=1e-6)


def test_first_stage_f_is_classic_f():
    data = make_iv_data(8, T=300, k=3, strength=0.2)
    y, X, Z = data.partialled()
    x = X[:, 0]
    coef, *_ = np.linalg.lstsq(Z, x, rcond=None)
    rss = np.sum((x - Z @ coef) ** 2)
    ess = np.sum((Z @ coef) ** 2)
    classic = (ess / data.k) / (rss / data.T)
    assert first_stage_f(data) == pytest.approx(classic, rel=1e-10)


def test_crra_moments_at_zero_gamma():
    rng = np.random.default_rng(3)
    consumption = np.exp(np.cumsum(rng.normal(0.0, 0.02, 41)))
    returns = rng.normal(0.05, 0.1, (40, 3))
    model = crra_model(consumption, returns, 0.97)
    np.testing.assert_allclose(model.moment_series([0.0]), 0.97 * (1.0 + returns) - 1.0)


def test_crra_rejects_bad_inputs():
    returns = np.zeros((4, 2))
    with pytest.raises(InputError) as e:
        crra_model(np.array([1.0, 1.1, -0.5, 1.0, 1.2]), returns, 0.95)
    assert e.value.row == 3
    bad_returns = returns.copy()
    bad_returns[1, 1] = -1.0
    with pytest.raises(InputError):
        crra_model(np.ones(5), bad_returns, 0.95)


def test_crra_safe_range(crra_sample, crra_params):
    model = crra_model(*crra_sample, crra_params.delta0)
    assert np.isfinite(model.safe_gamma)
    with pytest.raises(EvaluationError):
        model.moment_series([2.0 * model.safe_gamma])
    assert crra_model(np.ones(5), np.zeros((4, 2)), 0.95).safe_gamma == np.inf


def test_shipped_calibration(crra_calibration):
    params, settings = crra_calibration
    assert params.N == 5
    assert params.delta0 == 0.95
    assert params.gamma0 == 15.0
    assert settings == {"T": 100000, "reps": 1000}


def test_calibration_dump_and_load(tmp_path, crra_params):
    path = str(tmp_path / "calibration.json")
    shifted = crra_params.with_misspecification(0.1, 0.5)
    shifted.dump(path, T=500, reps=20)
    params, settings = load_crra_calibration(path)
    assert settings == {"T": 500, "reps": 20}
    assert params.c == 0.1 and params.c_tilde == 0.5
    np.testing.assert_allclose(params.V_rr, crra_params.V_rr)
    np.testing.assert_allclose(params.mean_log_returns, shifted.mean_log_returns)


def test_calibration_errors(tmp_path, crra_params):
    with pytest.raises(InputError):
        crra_params.with_misspecification(0.0, 10.0)
    with pytest.raises(InputError):
        load_crra_calibration(str(tmp_path / "missing.json"))
    flat = crra_params.to_dict()
    del flat["V_rr_2_3"]
    with pytest.raises(InputError):
        CrraDgpParams.from_dict(flat)


def test_population_moment_vanishes_at_gamma0(crra_params):
    mu, V = crra_population(crra_params, crra_params.gamma0)
    np.testing.assert_allclose(mu, 0.0, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(V) > 0)
    assert crra_population_objective(crra_params, crra_params.gamma0) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("c, gamma", [(0.0, 15.0), (0.1, 24.0), (0.1, 10.0)])
def test_population_moments_match_monte_carlo(crra_params, c, gamma):
    params = crra_params.with_misspecification(c)
    consumption, returns = crra_dgp_sample(params, 1_000_000, 77)
    f = crra_model(consumption, returns, params.delta0).moment_series([gamma])
    mu, V = crra_population(params, gamma)

    n = f.shape[0]
    f_c = f - f.mean(axis=0)
    assert np.all(np.abs(f.mean(axis=0) - mu) <= 4 * f.std(axis=0) / np.sqrt(n))
    for i in range(f.shape[1]):
        for j in range(i + 1):
            product = f_c[:, i] * f_c[:, j]
            assert abs(product.mean() - V[i, j]) <= 4 * product.std() / np.sqrt(n), (i, j)


def test_pseudo_true_gamma(crra_params):
    correct = crra_pseudo_true(crra_params)
    assert correct.gamma_star == pytest.approx(15.0, abs=1e-6)
    assert correct.min_obj == pytest.approx(0.0, abs=1e-14)
    assert not correct.at_bracket_edge

    shifted = crra_pseudo_true(crra_params.with_misspecification(0.1))
    assert shifted.gamma_star == pytest.approx(24.0, abs=0.5)
    assert shifted.min_obj > 0


def test_dgp_sample_is_reproducible(crra_params):
    a = crra_dgp_sample(crra_params, 100, 5)
    b = crra_dgp_sample(crra_params, 100, 5)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert a[0][0] == 1.0
    assert a[0].shape == (101,) and a[1].shape == (100, 5)


def test_sampled_log_growth_covariance(crra_params):
    consumption, returns = crra_dgp_sample(crra_params, 200_000, 9)
    log_growth = np.diff(np.log(consumption))
    n = log_growth.shape[0]
    chi2 = scipy.stats.chi2(n - 1)
    ratio = (n - 1) * log_growth.var(ddof=1) / crra_params.V_cc
    assert chi2.ppf(0.0005) < ratio < chi2.ppf(0.9995)
