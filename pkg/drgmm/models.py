# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Concrete moment models.

- FactorModel: linear asset pricing, mu_f(lambda) = mu_R - beta lambda, returns taken in deviation of one asset
- IvModel: linear instrumental variables, mu_f(theta) = sigma_Zy - Sigma_ZX theta
- CrraModel: consumption Euler equation with power utility and a fixed discount factor

The CRRA log-normal data generating process lives here as well, with its population moments and pseudo-true value.
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass, field, asdict, replace
from typing import Optional, Tuple, NamedTuple, Union, Dict, Any

import numpy as np
import scipy.optimize

from drgmm import linalg
from drgmm.errors import InputError, EvaluationError, DrgmmWarning
from drgmm.moments import MomentModel, CovarianceBlocks, as_theta

logger = logging.getLogger(__name__)

CRRA_SAFE_EXPONENT = 600.0
"""largest |gamma * log consumption growth| accepted before exp() is considered to overflow"""

CRRA_GAMMA_BRACKET = (-50.0, 100.0)

DEFAULT_CALIBRATION_PATH = os.path.join(os.path.dirname(__file__), "data", "crra_calibration.json")


def _check_finite(name: str, values: np.ndarray):
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad.reshape(values.shape[0], -1))[0]
        raise InputError(f"non-finite value in {name}", row=int(row) + 1, column=f"{name}[{col}]")


def _demean(a: np.ndarray) -> np.ndarray:
    return a - a.mean(axis=0)


def _check_full_rank(name: str, gram: np.ndarray):
    if not linalg.is_positive_definite(gram):
        raise InputError(f"{name} is rank deficient")


# ---------------------------------------------------------------------------------------------------------------------
# Linear asset pricing


@dataclass(frozen=True, eq=False)
class FactorData:
    """Asset returns and factors

    :param R: T x (N+1) raw returns, or T x N excess returns when excess is set
    :param F: T x m factors
    :param excess: returns are already excess returns, nothing is subtracted
    :param subtract_index: column of R subtracted from the others for raw returns (default: last column)
    """

    R: np.ndarray
    F: np.ndarray
    excess: bool = False
    subtract_index: Optional[int] = None

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        F = np.asarray(self.F, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        assert R.shape[0] == F.shape[0], f"R has {R.shape[0]} rows but F has {F.shape[0]}"
        _check_finite("R", R)
        _check_finite("F", F)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "F", F)
        if not self.excess:
            assert R.shape[1] >= 2, "raw returns need at least two assets"
            if self.subtract_index is not None:
                assert 0 <= self.subtract_index < R.shape[1], f"subtract_index {self.subtract_index} out of range"
        n, m = self.N, self.m
        assert self.T > n + m, f"need T > N + m, got T={self.T}, N={n}, m={m}"

    @property
    def T(self) -> int:
        return self.R.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[1]

    @property
    def N(self) -> int:
        return self.R.shape[1] if self.excess else self.R.shape[1] - 1

    def excess_returns(self) -> np.ndarray:
        """T x N returns in deviation of the subtracted asset"""
        if self.excess:
            return self.R
        j = self.R.shape[1] - 1 if self.subtract_index is None else self.subtract_index
        others = np.delete(self.R, j, axis=1)
        return others - self.R[:, [j]]


class FactorModel(MomentModel):
    """Linear factor model, f_t(lambda) built from the OLS influence of (R_bar, beta_hat)

    With the factors demeaned in sample, the per observation moment
        f_t = R_bar + eps_t (1 - F_t' Q^-1 lambda) - beta_hat lambda
    averages to R_bar - beta_hat lambda, and its derivative q_t = -beta_hat - eps_t (Q^-1 F_t)' averages to -beta_hat.
    With iid set, covariances use the closed forms
        V_ff = (1 + lambda' Q^-1 lambda) Omega,  V_theta_i_f = (Q^-1 lambda)_i Omega,  V_theta_theta = Q^-1 kron Omega
    """

    name = "factor"
    is_linear = True

    def __init__(self, data: FactorData, *, iid: bool = True):
        super().__init__(T=data.T, k_f=data.N, m=data.m)
        self.data = data
        self.kronecker = iid
        R = data.excess_returns()
        F_bar = _demean(data.F)
        self.mean_returns = R.mean(axis=0)
        self.q_ff = linalg.symmetrize(F_bar.T @ F_bar / data.T)
        _check_full_rank("factor matrix", self.q_ff)
        self.q_ff_inv = linalg.inverse(self.q_ff, "Q_FF")
        self.beta = _demean(R).T @ F_bar @ self.q_ff_inv / data.T
        self.residuals = _demean(R) - F_bar @ self.beta.T
        self.omega = linalg.symmetrize(self.residuals.T @ self.residuals / data.T)
        self._scores = F_bar @ self.q_ff_inv
        logger.debug("factor model: T=%d N=%d m=%d iid=%s", data.T, data.N, data.m, iid)

    def moment_series(self, theta: np.ndarray) -> np.ndarray:
        theta = as_theta(self, theta)
        weight = 1.0 - self._scores @ theta
        return self.mean_returns + self.residuals * weight[:, None] - self.beta @ theta

    def derivative_series(self, theta: np.ndarray) -> np.ndarray:
        return -self.beta[None, :, :] - self.residuals[:, :, None] * self._scores[:, None, :]

    def sample_moments(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        theta = as_theta(self, theta)
        return self.mean_returns - self.beta @ theta, -self.beta.copy()

    def covariance(self, theta: np.ndarray) -> CovarianceBlocks:
        if not self.kronecker:
            return super().covariance(theta)
        theta = as_theta(self, theta)
        weighted = self.q_ff_inv @ theta
        return CovarianceBlocks(
            V_ff=(1.0 + theta @ weighted) * self.omega,
            V_theta_f=np.stack([w * self.omega for w in weighted]),
            V_theta_theta=np.kron(self.q_ff_inv, self.omega),
        )

    def rank_inputs(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kronecker:
            return self.beta, np.kron(self.q_ff_inv, self.omega)
        return super().rank_inputs()

    def theta_guess(self) -> np.ndarray:
        guess, *_ = np.linalg.lstsq(self.beta, self.mean_returns, rcond=None)
        return guess


def factor_model(data: FactorData, *, iid: bool = True) -> FactorModel:
    return FactorModel(data, iid=iid)


# ---------------------------------------------------------------------------------------------------------------------
# Linear instrumental variables


@dataclass(frozen=True, eq=False)
class IvData:
    """y: T, X: T x m endogenous, Z: T x k instruments, W: T x p included exogenous (partialled out with a constant)"""

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    W: Optional[np.ndarray] = None

    def __post_init__(self):
        def as_matrix(a):
            a = np.asarray(a, dtype=float)
            return a[:, None] if a.ndim == 1 else a

        y = np.asarray(self.y, dtype=float).reshape(-1)
        X, Z = as_matrix(self.X), as_matrix(self.Z)
        W = np.zeros((y.shape[0], 0)) if self.W is None else as_matrix(self.W)
        for name, a in (("y", y[:, None]), ("X", X), ("Z", Z), ("W", W)):
            assert a.shape[0] == y.shape[0], f"{name} has {a.shape[0]} rows, expected {y.shape[0]}"
            _check_finite(name, a)
        assert Z.shape[1] > X.shape[1], f"need more instruments than endogenous variables, got k={Z.shape[1]}"
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "W", W)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def partialled(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(y, X, Z) with the constant and W projected out by least squares"""
        exog = np.column_stack([np.ones(self.T), self.W])
        stacked = np.column_stack([self.y, self.X, self.Z])
        coef, *_ = np.linalg.lstsq(exog, stacked, rcond=None)
        resid = stacked - exog @ coef
        return resid[:, 0], resid[:, 1 : 1 + self.m], resid[:, 1 + self.m :]


class IvModel(MomentModel):
    """Linear IV, f_t = Z_t (y_t - X_t' theta) after partialling out the exogenous regressors

    Under iid, with Omega the reduced form residual covariance of (y, X) and a = (1, -theta):
        V_ff = (a' Omega a) Q_ZZ,  V_theta_i_f = -(Omega a)_{i+1} Q_ZZ,  V_theta_theta = Omega_VV kron Q_ZZ
    """

    name = "iv"
    is_linear = True

    def __init__(self, data: IvData, *, iid: bool = True):
        super().__init__(T=data.T, k_f=data.k, m=data.m)
        self.data = data
        self.kronecker = iid
        y, X, Z = data.partialled()
        self._y, self._X, self._Z = y, X, Z
        T = data.T
        self.q_zz = linalg.symmetrize(Z.T @ Z / T)
        _check_full_rank("instrument matrix after partialling out the exogenous regressors", self.q_zz)
        self.q_zz_inv = linalg.inverse(self.q_zz, "Q_ZZ")
        self.sigma_zy = Z.T @ y / T
        self.sigma_zx = Z.T @ X / T
        yx = np.column_stack([y, X])
        reduced = yx - Z @ (self.q_zz_inv @ (Z.T @ yx / T))
        self.omega = linalg.symmetrize(reduced.T @ reduced / T)

    def moment_series(self, theta: np.ndarray) -> np.ndarray:
        theta = as_theta(self, theta)
        return self._Z * (self._y - self._X @ theta)[:, None]

    def derivative_series(self, theta: np.ndarray) -> np.ndarray:
        return -self._Z[:, :, None] * self._X[:, None, :]

    def sample_moments(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        theta = as_theta(self, theta)
        return self.sigma_zy - self.sigma_zx @ theta, -self.sigma_zx.copy()

    def covariance(self, theta: np.ndarray) -> CovarianceBlocks:
        if not self.kronecker:
            return super().covariance(theta)
        a = np.concatenate([[1.0], -as_theta(self, theta)])
        omega_a = self.omega @ a
        return CovarianceBlocks(
            V_ff=float(a @ omega_a) * self.q_zz,
            V_theta_f=np.stack([-omega_a[i + 1] * self.q_zz for i in range(self.m)]),
            V_theta_theta=np.kron(self.omega[1:, 1:], self.q_zz),
        )

    def rank_inputs(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kronecker:
            return self.sigma_zx, np.kron(self.omega[1:, 1:], self.q_zz)
        return super().rank_inputs()

    def theta_guess(self) -> np.ndarray:
        """2SLS estimate"""
        projected = self.sigma_zx.T @ self.q_zz_inv
        return np.linalg.solve(projected @ self.sigma_zx, projected @ self.sigma_zy)


def iv_model(data: IvData, *, iid: bool = True) -> IvModel:
    return IvModel(data, iid=iid)


def iv_char_poly(data: Union[IvData, IvModel]):
    """Roots of |tau Omega - (sigma_Zy : Sigma_ZX)' Q_ZZ^-1 (sigma_Zy : Sigma_ZX)| = 0

    T times the smallest root is the iid IV J statistic (the LIML objective), attained at theta = -v[1:] / v[0].
    """
    from drgmm.solver import generalized_char_poly

    model = data if isinstance(data, IvModel) else IvModel(data)
    moments = np.column_stack([model.sigma_zy, model.sigma_zx])
    return generalized_char_poly(moments.T @ model.q_zz_inv @ moments, model.omega)


def first_stage_f(data: Union[IvData, IvModel]) -> float:
    """First stage F statistic, the identification strength statistic divided by its degrees of freedom"""
    from drgmm.stats import rank_is_statistic

    model = data if isinstance(data, IvModel) else IvModel(data)
    return rank_is_statistic(model).extras["f_statistic"]


# ---------------------------------------------------------------------------------------------------------------------
# CRRA Euler equation


class CrraModel(MomentModel):
    """f_t(gamma) = delta0 (C_{t+1}/C_t)^-gamma (1 + R_{t+1}) - 1 for N assets, gamma scalar

    :param consumption: T+1 consumption levels, strictly positive
    :param returns: T x N net returns aligned with the consumption growth C_{t+1}/C_t, all above -1
    :param delta0: fixed discount factor
    """

    name = "crra"

    def __init__(self, consumption: np.ndarray, returns: np.ndarray, delta0: float):
        consumption = np.asarray(consumption, dtype=float).reshape(-1)
        returns = np.asarray(returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        assert consumption.shape[0] == returns.shape[0] + 1, (
            f"need one more consumption level than return rows, got {consumption.shape[0]} and {returns.shape[0]}"
        )
        assert 0.0 < delta0, f"discount factor has to be positive, got {delta0}"
        _check_finite("C", consumption[:, None])
        _check_finite("R", returns)
        if np.any(consumption <= 0):
            raise InputError("consumption has to be positive", row=int(np.argmax(consumption <= 0)) + 1, column="C")
        if np.any(returns <= -1):
            bad = np.argwhere(returns <= -1)[0]
            raise InputError("gross returns have to be positive", row=int(bad[0]) + 1, column=f"R[{bad[1]}]")
        super().__init__(T=returns.shape[0], k_f=returns.shape[1], m=1)
        self.delta0 = float(delta0)
        self.log_growth = np.diff(np.log(consumption))
        self.gross_returns = 1.0 + returns
        self.max_abs_log_growth = float(np.max(np.abs(self.log_growth)))

    @property
    def safe_gamma(self) -> float:
        """largest |gamma| for which the moment function is evaluated"""
        if self.max_abs_log_growth == 0.0:
            return np.inf
        return CRRA_SAFE_EXPONENT / self.max_abs_log_growth

    def _discounted(self, theta: np.ndarray) -> np.ndarray:
        gamma = float(as_theta(self, theta)[0])
        if abs(gamma) > self.safe_gamma:
            raise EvaluationError(
                f"gamma={gamma} outside the safe range |gamma| <= {self.safe_gamma:.4g} for this sample"
            )
        return self.delta0 * np.exp(-gamma * self.log_growth)[:, None] * self.gross_returns

    def moment_series(self, theta: np.ndarray) -> np.ndarray:
        return self._discounted(theta) - 1.0

    def derivative_series(self, theta: np.ndarray) -> np.ndarray:
        return (-self.log_growth[:, None] * self._discounted(theta))[:, :, None]

    def theta_guess(self) -> np.ndarray:
        return np.zeros(1)


def crra_model(consumption: np.ndarray, returns: np.ndarray, delta0: float) -> CrraModel:
    return CrraModel(consumption, returns, delta0)


@dataclass(frozen=True, eq=False)
class CrraDgpParams:
    """Log-normal DGP of (log consumption growth, log gross returns) ~ NID((0, mu2), V)

    mu2 is derived when not given: the correct specification value at gamma0 shifted down by c.
    c_tilde scales V_rc, i.e. the correlation between consumption growth and returns, to vary identification.
    """

    delta0: float
    V_cc: float
    V_rc: np.ndarray
    V_rr: np.ndarray
    gamma0: float = 15.0
    c: float = 0.0
    c_tilde: float = 1.0
    mu2: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        V_rc = np.asarray(self.V_rc, dtype=float).reshape(-1)
        V_rr = np.atleast_2d(np.asarray(self.V_rr, dtype=float))
        object.__setattr__(self, "V_rc", V_rc)
        object.__setattr__(self, "V_rr", V_rr)
        n = V_rc.shape[0]
        assert 0.0 < self.delta0 < 1.0, f"delta0 has to be in (0, 1), got {self.delta0}"
        assert self.V_cc > 0.0, f"V_cc has to be positive, got {self.V_cc}"
        assert V_rr.shape == (n, n), f"V_rr has to be {n}x{n}, got {V_rr.shape}"
        assert self.c >= 0.0, f"misspecification shift c has to be non negative, got {self.c}"
        assert self.c_tilde > 0.0, f"identification scale c_tilde has to be positive, got {self.c_tilde}"
        if self.mu2 is not None:
            mu2 = np.asarray(self.mu2, dtype=float).reshape(-1)
            assert mu2.shape == (n,), f"mu2 has to have {n} entries"
            object.__setattr__(self, "mu2", mu2)
        bound = np.sqrt(self.V_cc * np.diag(V_rr))
        if np.any(np.abs(self.scaled_V_rc) > bound):
            raise InputError(f"c_tilde={self.c_tilde} violates the correlation bound |c_tilde V_rc| <= sqrt(V_cc V_rr)")
        if not linalg.is_positive_definite(self.joint_covariance):
            raise InputError("joint covariance of consumption growth and returns is not positive definite")

    @property
    def N(self) -> int:
        return self.V_rc.shape[0]

    @property
    def scaled_V_rc(self) -> np.ndarray:
        return self.c_tilde * self.V_rc

    @property
    def joint_covariance(self) -> np.ndarray:
        n = self.N
        V = np.empty((n + 1, n + 1))
        V[0, 0] = self.V_cc
        V[0, 1:] = V[1:, 0] = self.scaled_V_rc
        V[1:, 1:] = self.V_rr
        return V

    @property
    def mean_log_returns(self) -> np.ndarray:
        if self.mu2 is not None:
            return self.mu2
        g = self.gamma0
        correct = -np.log(self.delta0) - 0.5 * (
            np.diag(self.V_rr) + g * g * self.V_cc - 2.0 * g * self.scaled_V_rc
        )
        return correct - self.c

    def with_misspecification(self, c: float, c_tilde: Optional[float] = None) -> "CrraDgpParams":
        return replace(self, c=c, c_tilde=self.c_tilde if c_tilde is None else c_tilde, mu2=None)

    def to_dict(self) -> Dict[str, Any]:
        """flat key/value representation"""
        flat = {k: v for k, v in asdict(self).items() if k not in ("V_rc", "V_rr", "mu2")}
        for i, v in enumerate(self.V_rc):
            flat[f"V_rc_{i + 1}"] = float(v)
        for i in range(self.N):
            for j in range(self.N):
                flat[f"V_rr_{i + 1}_{j + 1}"] = float(self.V_rr[i, j])
        if self.mu2 is not None:
            for i, v in enumerate(self.mu2):
                flat[f"mu2_{i + 1}"] = float(v)
        return flat

    @classmethod
    def from_dict(cls, flat: Dict[str, Any]) -> "CrraDgpParams":
        n = sum(1 for key in flat if key.startswith("V_rc_"))
        if n == 0:
            raise InputError("calibration has no V_rc_<i> entries")
        try:
            V_rc = [flat[f"V_rc_{i + 1}"] for i in range(n)]
            V_rr = [[flat[f"V_rr_{i + 1}_{j + 1}"] for j in range(n)] for i in range(n)]
            mu2 = [flat[f"mu2_{i + 1}"] for i in range(n)] if "mu2_1" in flat else None
            return cls(
                delta0=float(flat["delta0"]),
                V_cc=float(flat["V_cc"]),
                V_rc=np.array(V_rc, dtype=float),
                V_rr=np.array(V_rr, dtype=float),
                gamma0=float(flat.get("gamma0", 15.0)),
                c=float(flat.get("c", 0.0)),
                c_tilde=float(flat.get("c_tilde", 1.0)),
                mu2=None if mu2 is None else np.array(mu2, dtype=float),
            )
        except KeyError as e:
            raise InputError(f"calibration is missing key {e}") from e

    def dump(self, path: str, **extra):
        with open(path, "w") as f:
            json.dump({**self.to_dict(), **extra}, f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "CrraDgpParams":
        return load_crra_calibration(path)[0]


def load_crra_calibration(path: Optional[str] = None) -> Tuple[CrraDgpParams, Dict[str, Any]]:
    """Read a flat calibration file, default to the shipped one

    :return: (parameters, remaining settings such as T and reps)
    """
    path = path or DEFAULT_CALIBRATION_PATH
    try:
        with open(path) as f:
            flat = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read calibration file {path}: {e}") from e
    params = CrraDgpParams.from_dict(flat)
    known = set(params.to_dict()) | {"mu2_1"}
    settings = {k: v for k, v in flat.items() if k not in known and not k.startswith("mu2_")}
    return params, settings


def _gamma_exponent(params: CrraDgpParams, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """mean e and covariance Sigma of the log of delta0 (C_{t+1}/C_t)^-gamma (1 + R_{t+1})"""
    A = np.column_stack([-gamma * np.ones(params.N), np.eye(params.N)])
    sigma = linalg.symmetrize(A @ params.joint_covariance @ A.T)
    e = np.log(params.delta0) + params.mean_log_returns + 0.5 * np.diag(sigma)
    return e, sigma


def crra_population(params: CrraDgpParams, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Population moment mu_f(gamma) and covariance V_ff(gamma) of the CRRA moment under the log-normal DGP

    V_ff,ij = exp(e_i + e_j) (exp(Sigma_ij) - 1): Hadamard product of the level terms and the log covariance.
    """
    e, sigma = _gamma_exponent(params, float(gamma))
    w = np.exp(e)
    return np.expm1(e), np.outer(w, w) * np.expm1(sigma)


def crra_population_objective(params: CrraDgpParams, gamma: float) -> float:
    """mu_f' V_ff^-1 mu_f, computed on the scaled moment 1 - exp(-e) for accuracy near the root"""
    e, sigma = _gamma_exponent(params, float(gamma))
    u = -np.expm1(-e)
    return float(u @ linalg.inverse(np.expm1(sigma), "V_ff(gamma)") @ u)


class PseudoTrueValue(NamedTuple):
    gamma_star: float
    min_obj: float
    at_bracket_edge: bool


def crra_pseudo_true(
    params: CrraDgpParams, *, bracket: Tuple[float, float] = CRRA_GAMMA_BRACKET, grid_size: int = 1501
) -> PseudoTrueValue:
    """Minimizer of the population CUE objective over gamma, grid over the bracket then bounded Brent refinement"""
    grid = np.linspace(bracket[0], bracket[1], grid_size)
    values = np.array([crra_population_objective(params, g) for g in grid])
    best = int(np.argmin(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid_size - 1)]
    res = scipy.optimize.minimize_scalar(
        lambda g: crra_population_objective(params, g), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9}
    )
    gamma_star, min_obj = float(res.x), float(res.fun)
    if values[best] < min_obj:
        gamma_star, min_obj = float(grid[best]), float(values[best])
    at_edge = best in (0, grid_size - 1)
    if at_edge:
        warnings.warn(
            f"pseudo-true gamma {gamma_star:.4g} sits at the edge of the search bracket {bracket}", DrgmmWarning
        )
    logger.debug("pseudo-true gamma %.6f, objective %.3e (c=%s)", gamma_star, min_obj, params.c)
    return PseudoTrueValue(gamma_star, max(min_obj, 0.0), at_edge)


def crra_dgp_sample(
    params: CrraDgpParams, T: int, seed: Union[int, np.random.Generator]
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact log-normal draws

    :return: (T+1 consumption levels starting at 1, T x N net returns)
    """
    assert T >= 2, f"need at least two periods, got {T}"
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chol = np.linalg.cholesky(params.joint_covariance)
    draws = rng.standard_normal((T, params.N + 1)) @ chol.T
    log_growth = draws[:, 0]
    log_returns = draws[:, 1:] + params.mean_log_returns
    consumption = np.exp(np.concatenate([[0.0], np.cumsum(log_growth)]))
    return consumption, np.expm1(log_returns)
