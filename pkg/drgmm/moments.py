# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Generic moment evaluation for continuous updating GMM.

A MomentModel provides the per observation moment function f_t(theta) (k_f values) and its analytic derivative
q_t(theta) (k_f x m). Everything a test statistic needs at a hypothesized theta is gathered in a MomentEvaluation:
the sample averages, the recentered covariance blocks, their Schur complement and the recentered Jacobian D_hat.
"""

import abc
import logging
import warnings
from dataclasses import dataclass
from typing import Tuple, Optional

import numpy as np

from drgmm import linalg
from drgmm.errors import EvaluationError, DrgmmWarning, UnsupportedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CovarianceBlocks:
    """Recentered covariance estimators of (f_t, vec(q_t))

    V_theta_f has shape (m, k_f, k_f): block i is the covariance between the i-th column of q_t and f_t.
    V_theta_theta is the (k_f m) x (k_f m) covariance of vec(q_t), columns of q_t stacked.
    """

    V_ff: np.ndarray
    V_theta_f: np.ndarray
    V_theta_theta: np.ndarray


class MomentModel(abc.ABC):
    """Pluggable moment model with dimensions (k_f, m) over T observations

    Implementations must be immutable once constructed: the same instance is shared by parallel grid scans and Monte
    Carlo workers.
    """

    name: str = "moment_model"

    is_linear: bool = False
    """moments are affine in theta and the derivative does not depend on theta"""

    kronecker: bool = False
    """covariance blocks are scalar multiples of a single k_f x k_f matrix (iid closed forms)"""

    def __init__(self, *, T: int, k_f: int, m: int):
        assert k_f > m, f"model has to be overidentified, got k_f={k_f} and m={m}"
        assert T >= 2, f"at least two observations are needed, got T={T}"
        self._T = T
        self._k_f = k_f
        self._m = m

    @property
    def T(self) -> int:
        return self._T

    @property
    def k_f(self) -> int:
        return self._k_f

    @property
    def m(self) -> int:
        return self._m

    @abc.abstractmethod
    def moment_series(self, theta: np.ndarray) -> np.ndarray:
        """:return: (T, k_f) array whose row t is f_t(theta)"""

    @abc.abstractmethod
    def derivative_series(self, theta: np.ndarray) -> np.ndarray:
        """:return: (T, k_f, m) array whose slice t is q_t(theta)"""

    def eval_f(self, theta: np.ndarray, obs_index: int) -> np.ndarray:
        return self.moment_series(theta)[obs_index]

    def eval_q(self, theta: np.ndarray, obs_index: int) -> np.ndarray:
        return self.derivative_series(theta)[obs_index]

    def sample_moments(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Sample averages (f_T, q_T), models with closed forms override this"""
        return self.moment_series(theta).mean(axis=0), self.derivative_series(theta).mean(axis=0)

    def covariance(self, theta: np.ndarray) -> CovarianceBlocks:
        """Covariance blocks used by the statistics, Eicker-White unless a model provides closed forms"""
        return eicker_white(self.moment_series(theta), self.derivative_series(theta))

    def rank_inputs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Jacobian estimate (k_f x m) and the covariance of its vec, inputs of the identification strength statistic

        Only linear models have a theta free Jacobian, others raise UnsupportedError.
        """
        if not self.is_linear:
            raise UnsupportedError(f"identification strength statistic needs a linear model, {self.name} is not")
        theta = np.zeros(self.m)
        return self.sample_moments(theta)[1], self.covariance(theta).V_theta_theta

    def theta_guess(self) -> np.ndarray:
        """Cheap starting point: least squares solution of f_T(0) + q_T(0) theta = 0"""
        f_0, q_0 = self.sample_moments(np.zeros(self.m))
        guess, *_ = np.linalg.lstsq(q_0, -f_0, rcond=None)
        return guess


def as_theta(model: MomentModel, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    assert theta.shape == (model.m,), f"theta must have {model.m} entries, got shape {theta.shape}"
    return theta


def _first_non_finite(series: np.ndarray) -> Optional[int]:
    bad = ~np.isfinite(series.reshape(series.shape[0], -1)).all(axis=1)
    if bad.any():
        return int(np.argmax(bad))
    return None


def evaluate_sample_moments(model: MomentModel, theta) -> Tuple[np.ndarray, np.ndarray]:
    """Sample moment f_T = (1/T) sum f_t(theta) and derivative q_T = (1/T) sum q_t(theta)

    :exception EvaluationError: a moment or derivative is not finite, the error names the first bad observation
    """
    theta = as_theta(model, theta)
    assert np.all(np.isfinite(theta)), f"theta has to be finite, got {theta}"
    f_T, q_T = model.sample_moments(theta)
    if not (np.all(np.isfinite(f_T)) and np.all(np.isfinite(q_T))):
        obs = _first_non_finite(model.moment_series(theta))
        if obs is None:
            obs = _first_non_finite(model.derivative_series(theta))
        raise EvaluationError(f"non-finite moment for theta={theta}", observation=obs)
    return f_T, q_T


def vec_series(q_series: np.ndarray) -> np.ndarray:
    """(T, k_f, m) derivatives to (T, k_f m) rows of vec(q_t), columns of q_t stacked"""
    t, k, m = q_series.shape
    return q_series.transpose(0, 2, 1).reshape(t, k * m)


def eicker_white(f_series: np.ndarray, q_series: np.ndarray) -> CovarianceBlocks:
    """Recentered outer product estimators of the covariances of f_t and vec(q_t)"""
    t, k, m = q_series.shape
    if t < k:
        warnings.warn(
            f"fewer observations ({t}) than moments ({k}): covariance estimates may be singular",
            DrgmmWarning,
        )
    f_c = f_series - f_series.mean(axis=0)
    q_c = vec_series(q_series)
    q_c = q_c - q_c.mean(axis=0)
    V_ff = linalg.symmetrize(f_c.T @ f_c / t)
    V_theta_f = (q_c.T @ f_c / t).reshape(m, k, k)
    V_theta_theta = linalg.symmetrize(q_c.T @ q_c / t)
    return CovarianceBlocks(V_ff=V_ff, V_theta_f=V_theta_f, V_theta_theta=V_theta_theta)


def eicker_white_covariance(
    model: MomentModel, theta, *, ridge: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eicker-White blocks at theta together with V_theta_theta.f, regardless of the model's closed forms

    :return: (V_ff, V_theta_f blocks, V_theta_theta, V_theta_theta_f)
    :exception SingularCovarianceError: V_ff is singular and ridge is not set
    """
    theta = as_theta(model, theta)
    blocks = eicker_white(model.moment_series(theta), model.derivative_series(theta))
    V_ff = blocks.V_ff
    V_ff_inv = linalg.inverse(V_ff, "V_ff", ridge=ridge)
    return V_ff, blocks.V_theta_f, blocks.V_theta_theta, _schur(blocks, V_ff_inv)


def _schur(blocks: CovarianceBlocks, V_ff_inv: np.ndarray) -> np.ndarray:
    m, k, _ = blocks.V_theta_f.shape
    stacked = blocks.V_theta_f.reshape(m * k, k)
    return linalg.symmetrize(blocks.V_theta_theta - stacked @ V_ff_inv @ stacked.T)


@dataclass(frozen=True, eq=False)
class MomentEvaluation:
    """Everything evaluated at a tested theta"""

    theta: np.ndarray
    f_T: np.ndarray
    q_T: np.ndarray
    V_ff: np.ndarray
    V_theta_f: np.ndarray
    V_theta_theta: np.ndarray
    V_theta_theta_f: np.ndarray
    D_hat: np.ndarray
    T: int
    V_ff_inv: np.ndarray

    @property
    def k_f(self) -> int:
        return self.f_T.shape[0]

    @property
    def m(self) -> int:
        return self.q_T.shape[1]

    @property
    def objective(self) -> float:
        return cue_objective(self)

    @property
    def scaled_objective(self) -> float:
        """T times the CUE objective, i.e. the GMM-AR statistic"""
        return self.T * cue_objective(self)

    @property
    def score(self) -> np.ndarray:
        """T f_T' V_ff^-1 D_hat, one half of the gradient of T Q_s(theta)"""
        return self.T * self.D_hat.T @ self.V_ff_inv @ self.f_T


def recentered_jacobian(evaluation: MomentEvaluation) -> np.ndarray:
    """D_hat(theta): column i is q_T,i - V_{theta_i f} V_ff^-1 f_T"""
    g = evaluation.V_ff_inv @ evaluation.f_T
    return evaluation.q_T - np.stack([block @ g for block in evaluation.V_theta_f], axis=1)


def cue_objective(evaluation: MomentEvaluation) -> float:
    """Unscaled CUE objective f_T' V_ff^-1 f_T, see MomentEvaluation.scaled_objective for T times it"""
    return float(evaluation.f_T @ evaluation.V_ff_inv @ evaluation.f_T)


def evaluate(model: MomentModel, theta, *, ridge: bool = False) -> MomentEvaluation:
    """Build the MomentEvaluation of a model at theta

    :exception EvaluationError: non-finite moments
    :exception SingularCovarianceError: singular V_ff (unless ridge)
    """
    theta = as_theta(model, theta)
    f_T, q_T = evaluate_sample_moments(model, theta)
    blocks = model.covariance(theta)
    V_ff_inv = linalg.inverse(blocks.V_ff, "V_ff", ridge=ridge)
    partial = MomentEvaluation(
        theta=theta,
        f_T=f_T,
        q_T=q_T,
        V_ff=blocks.V_ff,
        V_theta_f=blocks.V_theta_f,
        V_theta_theta=blocks.V_theta_theta,
        V_theta_theta_f=_schur(blocks, V_ff_inv),
        D_hat=q_T,
        T=model.T,
        V_ff_inv=V_ff_inv,
    )
    object.__setattr__(partial, "D_hat", recentered_jacobian(partial))
    return partial


def numerical_derivative(fun, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a vector or matrix valued function, derivative index last"""
    theta = np.asarray(theta, dtype=float)
    columns = []
    for i in range(theta.shape[0]):
        h = step * max(1.0, abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        columns.append((np.asarray(fun(up)) - np.asarray(fun(down))) / (2 * h))
    return np.stack(columns, axis=-1)
