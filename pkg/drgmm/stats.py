# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Test statistics at a hypothesized parameter value.

All score type statistics are built from the same MomentEvaluation. With V = V_ff(theta), g = V^-1 f_T and
s = D_hat' g:

- DRLM = T s' (G' V_theta_theta.f G + D_hat' V^-1 D_hat)^-1 s,   G = I_m kron g
- KLM  = T s' (D_hat' V^-1 D_hat)^-1 s
- AR   = T f_T' V^-1 f_T
"""

import functools
import logging
from dataclasses import dataclass, field
from typing import Optional, Dict, Any, List, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.stats

from drgmm import linalg
from drgmm.errors import DegenerateTestError, SingularCovarianceError, UnsupportedError, ConvergenceError
from drgmm.moments import MomentEvaluation, MomentModel

logger = logging.getLogger(__name__)

FIXED_CHI2 = "fixed-chi2"
CONDITIONAL_CALIBRATED = "conditional-calibrated"

CONDITIONAL_CV_FLOOR = 2.4
CONDITIONAL_CV_CAP = 250.0

CLR_DRAWS = 10_000
CLR_SEED = 20031
CLR_EXACT_LIMIT = 256


@dataclass(frozen=True)
class CriticalValuePolicy:
    """How the critical value of a test is chosen

    fixed-chi2 uses the chi2(df) quantile. conditional-calibrated uses the calibrated function of
    max(AR, S_lambda_lambda) and only exists for the DRLM statistic with one parameter at the 5% level.
    """

    kind: str = FIXED_CHI2
    alpha: float = 0.05

    def __post_init__(self):
        assert self.kind in (FIXED_CHI2, CONDITIONAL_CALIBRATED), f"unknown critical value policy {self.kind!r}"
        assert 0.0 < self.alpha < 1.0, f"alpha has to be in (0, 1), got {self.alpha}"
        if self.kind == CONDITIONAL_CALIBRATED and self.alpha != 0.05:
            raise UnsupportedError(f"conditional critical values are calibrated for alpha=0.05 only, got {self.alpha}")

    @property
    def conditional(self) -> bool:
        return self.kind == CONDITIONAL_CALIBRATED

    def chi2(self, df: int) -> float:
        return chi2_critical_value(df, self.alpha)

    def critical_value(self, df: int, conditioning: Optional[float] = None) -> float:
        if not self.conditional:
            return self.chi2(df)
        if df != 1:
            raise UnsupportedError(f"conditional critical values are calibrated for m=1 only, got df={df}")
        assert conditioning is not None, "conditional policy needs a conditioning value"
        return conditional_cv(conditioning, self.alpha)


FIXED_POLICY = CriticalValuePolicy()
CONDITIONAL_POLICY = CriticalValuePolicy(CONDITIONAL_CALIBRATED)


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    name: str
    value: float
    df: int
    critical_value: float
    reject: bool
    p_bound: float
    conditioning_value: Optional[float] = None
    policy: str = FIXED_CHI2
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "value": self.value,
            "df": self.df,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "p_bound": self.p_bound,
            "policy": self.policy,
        }
        if self.conditioning_value is not None:
            out["conditioning_value"] = self.conditioning_value
        out.update({k: v for k, v in self.extras.items() if np.isscalar(v)})
        return out


def build_result(name, value, df, cv, *, policy=FIXED_CHI2, conditioning=None, **extras) -> TestResult:
    value = max(float(value), 0.0)
    return TestResult(
        name=name,
        value=value,
        df=int(df),
        critical_value=float(cv),
        reject=bool(value > cv),
        p_bound=float(scipy.stats.chi2.sf(value, df)),
        conditioning_value=conditioning,
        policy=policy,
        extras=extras,
    )


@functools.lru_cache(maxsize=256)
def chi2_critical_value(df: int, alpha: float) -> float:
    return float(scipy.stats.chi2.isf(alpha, df))


def conditional_cv(r: float, alpha: float = 0.05) -> float:
    """Calibrated DRLM critical value given the conditioning value r = max(AR, S_lambda_lambda)

    f(r) = 2.4 + floor(r)^0.35 (3.84 - 2.4) / 250^0.35 for r <= 250, 3.84 above.
    """
    assert r >= 0, f"conditioning value has to be non negative, got {r}"
    if alpha != 0.05:
        raise UnsupportedError(f"conditional critical values are calibrated for alpha=0.05 only, got {alpha}")
    if r > CONDITIONAL_CV_CAP:
        return 3.84
    slope = (3.84 - CONDITIONAL_CV_FLOOR) / CONDITIONAL_CV_CAP ** 0.35
    return float(CONDITIONAL_CV_FLOOR + np.floor(r) ** 0.35 * slope)


def conditional_cv_array(r: np.ndarray) -> np.ndarray:
    """vectorized conditional_cv at alpha=0.05"""
    r = np.maximum(np.asarray(r, dtype=float), 0.0)
    cv = CONDITIONAL_CV_FLOOR + np.floor(r) ** 0.35 * (3.84 - CONDITIONAL_CV_FLOOR) / CONDITIONAL_CV_CAP ** 0.35
    return np.where(r > CONDITIONAL_CV_CAP, 3.84, cv)


def _kron_g(evaluation: MomentEvaluation) -> np.ndarray:
    g = evaluation.V_ff_inv @ evaluation.f_T
    return np.kron(np.eye(evaluation.m), g[:, None])


def _score(evaluation: MomentEvaluation) -> np.ndarray:
    return evaluation.D_hat.T @ evaluation.V_ff_inv @ evaluation.f_T


def identification_statistic(evaluation: MomentEvaluation) -> float:
    """S_lambda_lambda = T vec(D_hat)' V_theta_theta.f^-1 vec(D_hat)"""
    vec_d = evaluation.D_hat.T.reshape(-1)
    inv = linalg.inverse(evaluation.V_theta_theta_f, "V_theta_theta.f")
    return float(evaluation.T * vec_d @ inv @ vec_d)


def conditioning_statistic(evaluation: MomentEvaluation) -> float:
    """max(AR, S_lambda_lambda), the argument of the conditional critical value function"""
    return max(evaluation.scaled_objective, identification_statistic(evaluation))


def _weighted_score(name: str, evaluation: MomentEvaluation, weight: np.ndarray) -> float:
    try:
        inv = linalg.inverse(weight, f"{name} weight matrix")
    except SingularCovarianceError:
        raise DegenerateTestError(
            name, float(np.linalg.norm(evaluation.f_T)), float(np.linalg.norm(evaluation.D_hat))
        ) from None
    s = _score(evaluation)
    return float(evaluation.T * s @ inv @ s)


def drlm_value(evaluation: MomentEvaluation) -> float:
    G = _kron_g(evaluation)
    weight = G.T @ evaluation.V_theta_theta_f @ G + evaluation.D_hat.T @ evaluation.V_ff_inv @ evaluation.D_hat
    return _weighted_score("DRLM", evaluation, linalg.symmetrize(weight))


def drlm(evaluation: MomentEvaluation, policy: CriticalValuePolicy = FIXED_POLICY) -> TestResult:
    """Double robust score statistic, bounded by chi2(m) under misspecification and weak identification

    :exception DegenerateTestError: f_T and D_hat both vanish
    """
    value = drlm_value(evaluation)
    conditioning = conditioning_statistic(evaluation) if policy.conditional else None
    cv = policy.critical_value(evaluation.m, conditioning)
    return build_result("drlm", value, evaluation.m, cv, policy=policy.kind, conditioning=conditioning)


def klm(evaluation: MomentEvaluation, policy: CriticalValuePolicy = FIXED_POLICY) -> TestResult:
    """KLM score statistic, size correct without misspecification"""
    weight = evaluation.D_hat.T @ evaluation.V_ff_inv @ evaluation.D_hat
    value = _weighted_score("KLM", evaluation, linalg.symmetrize(weight))
    return build_result("klm", value, evaluation.m, policy.chi2(evaluation.m))


def gmm_ar(evaluation: MomentEvaluation, policy: CriticalValuePolicy = FIXED_POLICY) -> TestResult:
    return build_result("ar", evaluation.scaled_objective, evaluation.k_f, policy.chi2(evaluation.k_f))


def j_statistic(model: MomentModel, config=None, policy: CriticalValuePolicy = FIXED_POLICY) -> TestResult:
    """Overidentification statistic, T times the CUE objective at its minimum, chi2(k_f - m)

    :exception ConvergenceError: CUE search failed
    """
    from drgmm.solver import cue_estimate

    points = cue_estimate(model, config)
    df = model.k_f - model.m
    value = model.T * points.objective_at_cue
    return build_result("j", value, df, policy.chi2(df), cue=points.cue, exhaustive=points.exhaustive)


def restricted_rank_quadratic_form(
    jacobian: np.ndarray, covariance: np.ndarray, direction: np.ndarray, T: int
) -> float:
    """T (J c)' [(c' kron I) V (c kron I)]^-1 (J c): distance of the Jacobian J from a reduced rank along c"""
    k = jacobian.shape[0]
    selector = np.kron(direction[None, :], np.eye(k))
    restricted = jacobian @ direction
    cov = linalg.symmetrize(selector @ covariance @ selector.T)
    return float(T * restricted @ linalg.inverse(cov, "restricted covariance") @ restricted)


def _unit_direction(angles: np.ndarray) -> np.ndarray:
    """hyperspherical coordinates to a unit vector of dimension len(angles) + 1"""
    direction = np.ones(angles.shape[0] + 1)
    for i, a in enumerate(angles):
        direction[i] *= np.cos(a)
        direction[i + 1 :] *= np.sin(a)
    return direction


def rank_is_statistic(
    model: MomentModel, policy: CriticalValuePolicy = FIXED_POLICY, *, starts: int = 9
) -> TestResult:
    """Identification strength: reduced rank statistic of the Jacobian, chi2(k_f - m + 1)

    With m = 1 this is the quadratic form of the Jacobian in its covariance. With m > 1 the restricted quadratic form
    is minimized over the direction of the rank deficiency; its F version (value / df) is reported in extras.
    """
    jacobian, covariance = model.rank_inputs()
    k, m = jacobian.shape
    T = model.T
    df = k - m + 1
    if m == 1:
        value = restricted_rank_quadratic_form(jacobian, covariance, np.ones(1), T)
        direction = np.ones(1)
    else:
        value, direction = _minimize_rank_form(jacobian, covariance, T, starts)
    return build_result(
        "rank", value, df, policy.chi2(df), f_statistic=value / df, direction=direction
    )


def _minimize_rank_form(jacobian, covariance, T, starts) -> Tuple[float, np.ndarray]:
    m = jacobian.shape[1]

    def objective(angles):
        try:
            return restricted_rank_quadratic_form(jacobian, covariance, _unit_direction(np.atleast_1d(angles)), T)
        except SingularCovarianceError:
            return np.inf

    best_value, best_angles = np.inf, None
    if m == 2:
        edges = np.linspace(0.0, np.pi, starts + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            res = scipy.optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
            if res.fun < best_value:
                best_value, best_angles = float(res.fun), np.atleast_1d(res.x)
    else:
        rng = np.random.default_rng(CLR_SEED)
        for _ in range(starts):
            res = scipy.optimize.minimize(
                objective,
                rng.uniform(0.0, np.pi, m - 1),
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12},
            )
            if res.fun < best_value:
                best_value, best_angles = float(res.fun), res.x
    if best_angles is None or not np.isfinite(best_value):
        raise ConvergenceError("identification strength minimization failed for every start")
    return best_value, _unit_direction(best_angles)


def lr_value(ar: float, klm_value: float, rank_stat: float) -> float:
    """Likelihood ratio statistic for one parameter from AR, KLM and the rank statistic"""
    disc = (ar + rank_stat) ** 2 - 4.0 * (ar - klm_value) * rank_stat
    return 0.5 * (ar - rank_stat + np.sqrt(max(disc, 0.0)))


@functools.lru_cache(maxsize=64)
def _clr_null_draws(k: int, draws: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(k,))))
    return rng.chisquare(1, draws), rng.chisquare(k - 1, draws)


def clr_critical_values(
    rank_stat, k: int, alpha: float = 0.05, *, draws: int = CLR_DRAWS, seed: int = CLR_SEED
) -> np.ndarray:
    """Conditional critical values of the LR statistic given the rank statistic, from simulated null draws

    Under the null, LR(r) = (q1 + qk - r + sqrt((q1 + qk + r)^2 - 4 qk r)) / 2 with q1 ~ chi2(1), qk ~ chi2(k - 1).
    """
    assert k >= 2, f"need at least two moments, got {k}"
    r = np.maximum(np.atleast_1d(np.asarray(rank_stat, dtype=float)), 0.0)
    if r.size > CLR_EXACT_LIMIT:
        # the critical value is smooth and monotone in r, interpolate on quantiles of the requested values
        grid = np.unique(np.quantile(r, np.linspace(0.0, 1.0, CLR_EXACT_LIMIT)))
        return np.interp(r, grid, clr_critical_values(grid, k, alpha, draws=draws, seed=seed))
    q1, qk = _clr_null_draws(k, draws, seed)
    total = q1[None, :] + qk[None, :]
    rr = r[:, None]
    null_lr = 0.5 * (total - rr + np.sqrt((total + rr) ** 2 - 4.0 * qk[None, :] * rr))
    return np.quantile(null_lr, 1.0 - alpha, axis=1)


def conditional_lr(
    evaluation: MomentEvaluation, rank_stat: Optional[float] = None, policy: CriticalValuePolicy = FIXED_POLICY
) -> TestResult:
    """Conditional likelihood ratio test for one parameter

    :param rank_stat: conditioning statistic, S_lambda_lambda at the tested value by default
    :exception UnsupportedError: m > 1
    """
    if evaluation.m != 1:
        raise UnsupportedError(f"conditional LR is implemented for m=1, got m={evaluation.m}")
    if rank_stat is None:
        rank_stat = identification_statistic(evaluation)
    ar = evaluation.scaled_objective
    value = lr_value(ar, klm(evaluation).value, rank_stat)
    cv = float(clr_critical_values(rank_stat, evaluation.k_f, policy.alpha)[0])
    return build_result("lr", value, 1, cv, conditioning=float(rank_stat))


STATISTICS = {"drlm": drlm, "klm": klm, "ar": gmm_ar, "lr": conditional_lr}


def run_statistics(
    evaluation: MomentEvaluation,
    names: Sequence[str] = ("drlm", "klm", "ar"),
    policy: CriticalValuePolicy = FIXED_POLICY,
) -> List[TestResult]:
    results = []
    for name in names:
        assert name in STATISTICS, f"unknown statistic {name!r}, choose from {sorted(STATISTICS)}"
        if name == "lr":
            results.append(conditional_lr(evaluation, policy=policy))
        else:
            results.append(STATISTICS[name](evaluation, policy))
    return results
