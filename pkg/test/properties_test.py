# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from drgmm.limitdist import reconstruct, structural_matrix, svd_structural
from drgmm.models import factor_model
from drgmm.moments import evaluate, numerical_derivative
from drgmm.solver import (
    char_poly,
    constant_sum,
    constant_sum_value,
    drlm_derivative,
    drlm_maximizers,
    factor_pseudo_true,
)
from drgmm.stats import drlm_value, gmm_ar, identification_statistic, klm

from conftest import SeriesModel, make_factor_data, random_series_model

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
examples = settings(derandomize=True, max_examples=25, deadline=None)


def _factor(seed: int):
    data = make_factor_data(
        seed, T=120, N=5, misspecification=(seed % 5) / 10, beta_scale=0.2 + (seed % 7) / 5
    )
    return factor_model(data)


def _population(seed: int, N: int = 5):
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal(N)
    beta = rng.standard_normal(N)
    root = rng.standard_normal((N, N))
    omega = root @ root.T / N + 0.5 * np.eye(N)
    return mu, beta, omega, rng.uniform(0.2, 3.0)


def _thetas(seed: int, n: int = 3) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-4.0, 4.0, n)


@examples
@given(seeds)
def test_drlm_never_exceeds_klm(seed):
    model = _factor(seed)
    for theta in _thetas(seed):
        ev = evaluate(model, [theta])
        assert drlm_value(ev) <= klm(ev).value * (1 + 1e-10) + 1e-12


@examples
@given(seeds)
def test_drlm_vanishes_at_stationary_points(seed):
    model = _factor(seed)
    d = constant_sum(model)
    solution = char_poly(model.mean_returns, model.beta, model.omega, model.q_ff)
    for argmin in solution.argmins:
        if np.all(np.isfinite(argmin)) and np.all(np.abs(argmin) < 1e6):
            assert drlm_value(evaluate(model, argmin)) <= 1e-6 * max(1.0, d)


@examples
@given(seeds)
def test_constant_sum_does_not_move(seed):
    model = _factor(seed)
    values = [constant_sum_value(evaluate(model, [theta])) for theta in _thetas(seed, 5)]
    assert max(values) - min(values) <= 1e-8 * max(values)


@examples
@given(seeds)
def test_drlm_derivative_matches_finite_differences(seed):
    model = _factor(seed) if seed % 2 else random_series_model(seed % 1000)
    for theta in _thetas(seed, 2):
        ev = evaluate(model, [theta])
        fd = numerical_derivative(lambda t: drlm_value(evaluate(model, t)), np.array([theta]))
        scale = max(1.0, drlm_value(ev))
        np.testing.assert_allclose(drlm_derivative(ev, model), fd, rtol=1e-3, atol=1e-6 * scale)


@examples
@given(seeds)
def test_smallest_root_is_the_objective_minimum(seed):
    mu, beta, omega, Q = _population(seed)
    solution = char_poly(mu, beta, omega, np.array([[Q]]))
    phi = np.linspace(-np.pi / 2, np.pi / 2, 20001)
    # lambda = sqrt(Q) tan(phi) turns the objective into a quadratic form in (cos phi, sin phi)
    rotated = np.outer(np.cos(phi), mu) - np.sqrt(Q) * np.outer(np.sin(phi), beta)
    objective = np.einsum("pi,pi->p", rotated, np.linalg.solve(omega, rotated.T).T)
    tolerance = 1e-6 * max(1.0, solution.roots[-1])
    assert solution.roots[0] <= objective.min() + tolerance
    assert objective.min() <= solution.roots[0] + tolerance

    pseudo = factor_pseudo_true(mu, beta, omega, Q)
    assert pseudo.is_measure >= pseudo.min_obj - tolerance


@examples
@given(seeds)
def test_structural_decomposition_rebuilds_the_model(seed):
    mu, beta, omega, Q = _population(seed, N=6)
    decomposition = svd_structural(mu, beta, omega, Q)
    target = structural_matrix(mu, beta, omega, Q)
    scale = np.abs(target).max()
    np.testing.assert_allclose(reconstruct(decomposition, omega, Q), target, atol=1e-8 * scale)
    D_perp = decomposition.D_perp
    np.testing.assert_allclose(D_perp.T @ omega @ D_perp, np.eye(D_perp.shape[1]), atol=1e-8)
    np.testing.assert_allclose(
        D_perp.T @ decomposition.D_star, 0.0, atol=1e-8 * max(1.0, np.linalg.norm(decomposition.D_star))
    )


@examples
@given(seeds)
def test_maximizers_split_the_constant_sum(seed):
    model = _factor(seed)
    d = constant_sum(model)
    for theta in drlm_maximizers(model, d):
        ev = evaluate(model, [theta])
        assert abs(ev.scaled_objective - d / 2) <= 1e-7 * d


@examples
@given(seeds)
def test_statistics_invariant_to_moment_rotation(seed):
    model = random_series_model(seed % 1000, k=3)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    transformed = SeriesModel(model.a @ A.T, np.einsum("ij,tjm->tim", A, model.b))
    theta = _thetas(seed, 1)
    original, moved = evaluate(model, theta), evaluate(transformed, theta)
    for statistic in (lambda ev: drlm_value(ev), lambda ev: klm(ev).value, lambda ev: gmm_ar(ev).value):
        np.testing.assert_allclose(statistic(moved), statistic(original), rtol=1e-7, atol=1e-10)
    np.testing.assert_allclose(identification_statistic(moved), identification_statistic(original), rtol=1e-7)
