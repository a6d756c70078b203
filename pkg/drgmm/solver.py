# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Continuous updating estimation and the DRLM surface.

Grid searches run on psi = atan(theta / s) so that the whole real line, both infinities included, is covered by a
bounded grid. For linear models the CUE objective is a ratio of quadratic forms and its stationary values are the
roots of a characteristic polynomial (generalized eigenproblem).
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
from tqdm import tqdm

from drgmm import linalg
from drgmm.errors import (
    DrgmmError,
    ConvergenceError,
    StructureViolationError,
    UnsupportedError,
)
from drgmm.moments import MomentModel, MomentEvaluation, evaluate
from drgmm.stats import (
    CONDITIONAL_POLICY,
    CriticalValuePolicy,
    TestResult,
    build_result,
    drlm,
    identification_statistic,
)

logger = logging.getLogger(__name__)

INFINITY_TOLERANCE = 1e-10
SEGMENT_POINTS = 201
CONSTANT_SUM_PROBES = 10


@dataclass(frozen=True)
class SolverConfig:
    """Search settings of the CUE and of the grid based routines

    :param grid_size: points of the one dimensional psi grid
    :param grid_size_2d: points per axis of the two dimensional psi grid
    :param scale: atan scale s, derived from the model when None
    :param refine_tol: relative tolerance |d theta| < tol (1 + |theta|) of the refinement
    :param ridge: regularize singular covariances instead of skipping the point
    :param multistart: number of local searches for m >= 3
    :param with_progress_bar: show a tqdm bar over the grid
    """

    grid_size: int = 2001
    grid_size_2d: int = 161
    scale: Optional[float] = None
    refine_tol: float = 1e-8
    ridge: bool = False
    multistart: int = 9
    with_progress_bar: bool = False

    def __post_init__(self):
        assert self.grid_size >= 11, f"grid_size too small: {self.grid_size}"
        assert self.grid_size_2d >= 11, f"grid_size_2d too small: {self.grid_size_2d}"
        assert self.scale is None or self.scale > 0, f"atan scale has to be positive, got {self.scale}"
        assert self.refine_tol > 0, "refine_tol has to be positive"
        assert self.multistart >= 1, "multistart has to be at least one"


DEFAULT_CONFIG = SolverConfig()


def atan_scale(model: MomentModel, config: Optional[SolverConfig] = None) -> float:
    """s of the psi = atan(theta / s) grid: 10 times the median magnitude of a cheap first estimate"""
    config = config or DEFAULT_CONFIG
    if config.scale is not None:
        return config.scale
    try:
        guess = np.abs(model.theta_guess())
    except (DrgmmError, np.linalg.LinAlgError):
        guess = np.ones(model.m)
    guess = guess[np.isfinite(guess)]
    return 10.0 * max(1.0, float(np.median(guess)) if guess.size else 1.0)


def psi_grid(n: int) -> np.ndarray:
    """n points strictly inside (-pi/2, pi/2)"""
    return np.linspace(-np.pi / 2, np.pi / 2, n + 2)[1:-1]


def to_theta(psi, scale: float):
    return scale * np.tan(psi)


def to_psi(theta, scale: float):
    return np.arctan(np.asarray(theta, dtype=float) / scale)


def objective(model: MomentModel, theta, ridge: bool = False) -> float:
    """T times the CUE objective, +inf where the evaluation fails"""
    try:
        return evaluate(model, theta, ridge=ridge).scaled_objective
    except DrgmmError:
        return np.inf


def score(model: MomentModel, theta, ridge: bool = False) -> np.ndarray:
    """T f_T' V_ff^-1 D_hat, one half of the gradient of T times the CUE objective"""
    return evaluate(model, theta, ridge=ridge).score


class StationaryPoint(NamedTuple):
    theta: np.ndarray
    objective: float
    kind: str


@dataclass(frozen=True, eq=False)
class StationaryPointSet:
    """CUE and the other stationary points found by the search

    objective values are unscaled (T * objective_at_cue is the J statistic). When the infimum of the objective is
    approached at infinity, cue holds signed infinities and at_infinity is set.
    """

    cue: np.ndarray
    objective_at_cue: float
    other_points: List[StationaryPoint] = field(default_factory=list)
    exhaustive: bool = True
    at_infinity: bool = False


def _scan(model: MomentModel, thetas: np.ndarray, config: SolverConfig, desc: str) -> np.ndarray:
    values = np.empty(thetas.shape[0])
    for i, theta in enumerate(
        tqdm(thetas, disable=not config.with_progress_bar, desc=desc, leave=False)
    ):
        values[i] = objective(model, theta, config.ridge)
    if not np.isfinite(values).any():
        raise ConvergenceError(f"{desc}: CUE objective could not be evaluated at any grid point")
    return values


def _refine_root_1d(model, lo, hi, config) -> Optional[float]:
    def half_gradient(t):
        return score(model, np.array([t]), config.ridge)[0]

    try:
        return scipy.optimize.brentq(
            half_gradient, lo, hi, xtol=config.refine_tol * (1 + min(abs(lo), abs(hi))), rtol=config.refine_tol
        )
    except (ValueError, DrgmmError):
        return None


def _golden_1d(model, lo, hi, config) -> float:
    res = scipy.optimize.minimize_scalar(
        lambda t: objective(model, np.array([t]), config.ridge),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": config.refine_tol * (1 + max(abs(lo), abs(hi)))},
    )
    return float(res.x)


def _cue_1d(model: MomentModel, config: SolverConfig) -> StationaryPointSet:
    s = atan_scale(model, config)
    thetas = to_theta(psi_grid(config.grid_size), s)
    values = _scan(model, thetas[:, None], config, "cue grid")
    scores = np.full(thetas.shape[0], np.nan)
    for i, t in enumerate(thetas):
        if np.isfinite(values[i]):
            try:
                scores[i] = score(model, np.array([t]), config.ridge)[0]
            except DrgmmError:
                pass

    points = []
    for i in range(thetas.shape[0] - 1):
        a, b = scores[i], scores[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)) or np.sign(a) == np.sign(b):
            continue
        # score going from negative to positive is a minimum
        kind = "min" if a < b else "max"
        root = _refine_root_1d(model, thetas[i], thetas[i + 1], config)
        if root is None:
            if kind != "min":
                continue
            root = _golden_1d(model, thetas[i], thetas[i + 1], config)
        value = objective(model, np.array([root]), config.ridge) / model.T
        points.append(StationaryPoint(np.array([root]), value, kind))

    minima = [p for p in points if p.kind == "min"]
    best_grid = int(np.nanargmin(np.where(np.isfinite(values), values, np.nan)))
    grid_min = values[best_grid] / model.T
    if minima:
        cue_point = min(minima, key=lambda p: p.objective)
        if best_grid in (0, thetas.shape[0] - 1) and grid_min < cue_point.objective:
            return _at_infinity(thetas, best_grid, grid_min, points)
        others = [p for p in points if p is not cue_point]
        return StationaryPointSet(cue_point.theta, cue_point.objective, others, True, False)
    if best_grid in (0, thetas.shape[0] - 1):
        return _at_infinity(thetas, best_grid, grid_min, points)
    # flat stretch without sign change, fall back on a bounded search around the grid minimum
    root = _golden_1d(model, thetas[best_grid - 1], thetas[best_grid + 1], config)
    value = objective(model, np.array([root]), config.ridge) / model.T
    return StationaryPointSet(np.array([root]), value, points, True, False)


def _at_infinity(thetas, index, value, points) -> StationaryPointSet:
    logger.info("CUE objective infimum is approached at %s", "-inf" if index == 0 else "+inf")
    cue = np.array([-np.inf if index == 0 else np.inf])
    return StationaryPointSet(cue, float(value), points, True, True)


def _local_minima_2d(values: np.ndarray) -> List[Tuple[int, int]]:
    n0, n1 = values.shape
    padded = np.pad(values, 1, constant_values=np.inf)
    minima = []
    for i in range(n0):
        for j in range(n1):
            v = values[i, j]
            if np.isfinite(v) and v <= padded[i : i + 3, j : j + 3].min():
                minima.append((i, j))
    return minima


def _coordinate_descent(model, psi, step, s, config, max_sweeps: int = 50) -> np.ndarray:
    psi = psi.copy()
    half_pi = np.pi / 2 - 1e-12
    for _ in range(max_sweeps):
        previous = to_theta(psi, s)
        for axis in range(psi.shape[0]):

            def along(p, axis=axis):
                trial = psi.copy()
                trial[axis] = p
                return objective(model, to_theta(trial, s), config.ridge)

            lo, hi = max(psi[axis] - step, -half_pi), min(psi[axis] + step, half_pi)
            psi[axis] = scipy.optimize.minimize_scalar(
                along, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
            ).x
        current = to_theta(psi, s)
        if np.all(np.abs(current - previous) < config.refine_tol * (1 + np.abs(current))):
            break
    return psi


def _polish(model, theta, config) -> np.ndarray:
    """Newton type polish of the score, kept only if the objective does not increase"""
    try:
        res = scipy.optimize.root(lambda t: score(model, t, config.ridge) / model.T, theta, tol=1e-14)
    except DrgmmError:
        return theta
    if res.success and objective(model, res.x, config.ridge) <= objective(model, theta, config.ridge) + 1e-12:
        return res.x
    return theta


def _cue_2d(model: MomentModel, config: SolverConfig) -> StationaryPointSet:
    s = atan_scale(model, config)
    grid = psi_grid(config.grid_size_2d)
    step = grid[1] - grid[0]
    p0, p1 = np.meshgrid(grid, grid, indexing="ij")
    psis = np.column_stack([p0.ravel(), p1.ravel()])
    values = _scan(model, to_theta(psis, s), config, "cue grid 2d").reshape(p0.shape)

    candidates = sorted(_local_minima_2d(values), key=lambda ij: values[ij])[: max(config.multistart, 1)]
    points = []
    for i, j in candidates:
        psi = _coordinate_descent(model, np.array([grid[i], grid[j]]), step, s, config)
        theta = _polish(model, to_theta(psi, s), config)
        points.append(StationaryPoint(theta, objective(model, theta, config.ridge) / model.T, "min"))

    best = min(points, key=lambda p: p.objective)
    on_edge = [ij for ij in candidates if 0 in ij or config.grid_size_2d - 1 in ij]
    at_infinity = bool(on_edge) and values[on_edge[0]] / model.T < best.objective - 1e-12
    if at_infinity:
        i, j = on_edge[0]
        logger.info("2-D CUE objective infimum is approached on the edge of the psi grid")
        cue = to_theta(np.array([grid[i], grid[j]]), s)
        cue = np.where(np.isin([i, j], [0, config.grid_size_2d - 1]), np.sign(cue) * np.inf, cue)
        return StationaryPointSet(cue, float(values[i, j] / model.T), points, True, True)
    others = [p for p in points if p is not best]
    return StationaryPointSet(best.theta, best.objective, others, True, False)


def _cue_multistart(model: MomentModel, config: SolverConfig) -> StationaryPointSet:
    s = atan_scale(model, config)
    rng = np.random.default_rng(model.m)
    starts = [model.theta_guess()] + [s * np.tan(rng.uniform(-1.2, 1.2, model.m)) for _ in range(config.multistart - 1)]
    points = []
    for start in starts:
        res = scipy.optimize.minimize(
            lambda t: objective(model, t, config.ridge), start, method="BFGS", options={"gtol": 1e-10}
        )
        if np.isfinite(res.fun):
            points.append(StationaryPoint(res.x, float(res.fun) / model.T, "min"))
    if not points:
        raise ConvergenceError(f"no multistart search converged for m={model.m}")
    best = min(points, key=lambda p: p.objective)
    logger.warning("CUE for m=%d relies on %d local searches and is not guaranteed global", model.m, len(starts))
    return StationaryPointSet(best.theta, best.objective, [p for p in points if p is not best], False, False)


def cue_estimate(model: MomentModel, config: Optional[SolverConfig] = None) -> StationaryPointSet:
    """Global minimizer of the CUE objective

    m = 1 and m = 2 scan a psi grid and refine every local minimum, m >= 3 falls back on multistart local searches
    and is flagged non exhaustive.

    :exception ConvergenceError: the objective is not defined anywhere on the grid
    """
    config = config or DEFAULT_CONFIG
    if model.m == 1:
        result = _cue_1d(model, config)
    elif model.m == 2:
        result = _cue_2d(model, config)
    else:
        result = _cue_multistart(model, config)
    logger.debug("CUE %s, objective %.6g", result.cue, result.objective_at_cue)
    return result


# ---------------------------------------------------------------------------------------------------------------------
# Characteristic polynomial


@dataclass(frozen=True, eq=False)
class CharPolySolution:
    """Roots of |tau B - M| = 0 sorted ascending, and the parameter attaining each root

    The parameter of root i is -v[1:] / v[0] for its generalized eigenvector v, signed infinity when v[0] vanishes.
    """

    roots: np.ndarray
    argmins: List[np.ndarray]

    @property
    def min_objective(self) -> float:
        return float(self.roots[0])


def generalized_char_poly(M: np.ndarray, B: np.ndarray) -> CharPolySolution:
    M = linalg.symmetrize(M)
    linalg.checked_eigh(B, "characteristic polynomial metric")
    roots, vectors = scipy.linalg.eigh(M, linalg.symmetrize(B))
    scale = max(1.0, float(np.abs(roots).max()))
    assert roots[0] >= -1e-10 * scale, f"characteristic polynomial has a negative root {roots[0]}"
    argmins = []
    for v in vectors.T:
        head, tail = v[0], v[1:]
        if abs(head) < INFINITY_TOLERANCE * np.linalg.norm(v):
            direction = np.sign(head) if head != 0 else 1.0
            argmins.append(np.where(tail == 0, 0.0, -np.sign(tail) * direction * np.inf))
        else:
            argmins.append(-tail / head)
    return CharPolySolution(np.maximum(roots, 0.0), argmins)


def char_poly(mu_R: np.ndarray, beta: np.ndarray, Omega: np.ndarray, Q_FF: np.ndarray) -> CharPolySolution:
    """Roots of |tau diag(1, Q_FF^-1) - (mu_R : beta)' Omega^-1 (mu_R : beta)| = 0

    The smallest root is the minimum over lambda of the factor objective
    (mu_R - beta lambda)' Omega^-1 (mu_R - beta lambda) / (1 + lambda' Q_FF^-1 lambda).
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    Q_FF = np.atleast_2d(np.asarray(Q_FF, dtype=float))
    stacked = np.column_stack([mu_R, beta])
    M = stacked.T @ linalg.inverse(Omega, "Omega") @ stacked
    metric = scipy.linalg.block_diag(np.eye(1), linalg.inverse(Q_FF, "Q_FF"))
    return generalized_char_poly(M, metric)


class FactorPseudoTrue(NamedTuple):
    lambda_star: np.ndarray
    min_obj: float
    is_measure: float
    structural_ok: bool


def factor_pseudo_true(mu_R, beta, Omega, Q_FF) -> FactorPseudoTrue:
    """Pseudo-true risk premia of a linear factor model and its identification strength

    The identification strength is the smallest root of |tau Q_FF^-1 - beta' Omega^-1 beta| = 0. It is never below the
    minimal objective, and the pseudo-true value is interpretable as a risk premium only when it is strictly above.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    Q_FF = np.atleast_2d(np.asarray(Q_FF, dtype=float))
    solution = char_poly(mu_R, beta, Omega, Q_FF)
    gram = beta.T @ linalg.inverse(Omega, "Omega") @ beta
    is_measure = float(scipy.linalg.eigh(linalg.symmetrize(gram), linalg.inverse(Q_FF, "Q_FF"), eigvals_only=True)[0])
    min_obj = solution.min_objective
    return FactorPseudoTrue(solution.argmins[0], min_obj, max(is_measure, 0.0), is_measure > min_obj)


# ---------------------------------------------------------------------------------------------------------------------
# DRLM surface


def drlm_derivative(evaluation: MomentEvaluation, model: Optional[MomentModel] = None) -> np.ndarray:
    """Analytic derivative of the DRLM statistic for a linear one parameter model

    For linear moments dV_ff/dtheta = C + C' and dC/dtheta = V_theta_theta, with C = V_theta_f. The statistic is
    T s^2 / w with s = D_hat' V^-1 f_T and w = g' V_theta_theta.f g + D_hat' V^-1 D_hat.

    :exception UnsupportedError: m > 1 or a non linear model
    """
    if evaluation.m != 1 or (model is not None and not model.is_linear):
        raise UnsupportedError("analytic DRLM derivative needs a linear model with one parameter")
    V_inv = evaluation.V_ff_inv
    C = evaluation.V_theta_f[0]
    P = evaluation.V_theta_theta
    S = evaluation.V_theta_theta_f
    f, q, D = evaluation.f_T, evaluation.q_T[:, 0], evaluation.D_hat[:, 0]
    dV = C + C.T

    g = V_inv @ f
    dg = V_inv @ (q - dV @ g)
    dD = -P @ g - C @ dg
    s = D @ g
    ds = dD @ g + D @ dg
    dS = -(P @ V_inv @ C.T + C @ V_inv @ P) + C @ V_inv @ dV @ V_inv @ C.T
    w = g @ S @ g + D @ V_inv @ D
    dw = 2 * dg @ S @ g + g @ dS @ g + 2 * dD @ V_inv @ D - D @ V_inv @ dV @ V_inv @ D
    return np.array([evaluation.T * (2 * s * ds * w - s * s * dw) / (w * w)])


def drlm_derivative_kronecker(evaluation: MomentEvaluation) -> np.ndarray:
    """Product form of the DRLM derivative under Kronecker covariances

    DRLM'/2 = [(V^-1/2 f)'(S^-1/2 D) / (f'V^-1 f + D'S^-1 D)] (T D'S^-1 D - T f'V^-1 f) sqrt(tr S / tr V)
    The second factor vanishes where AR equals half of the constant sum.
    """
    assert evaluation.m == 1, "product form is for one parameter"
    V, S = evaluation.V_ff, evaluation.V_theta_theta_f
    f, D = evaluation.f_T, evaluation.D_hat[:, 0]
    whitened_f = linalg.inverse_sqrt(V, "V_ff") @ f
    whitened_d = linalg.inverse_sqrt(S, "V_theta_theta.f") @ D
    ar = whitened_f @ whitened_f
    id_strength = whitened_d @ whitened_d
    ratio = whitened_f @ whitened_d / (ar + id_strength)
    half = ratio * evaluation.T * (id_strength - ar) * np.sqrt(np.trace(S) / np.trace(V))
    return np.array([2.0 * half])


def _probe_thetas(model: MomentModel, count: int) -> np.ndarray:
    s = atan_scale(model)
    rng = np.random.default_rng(count)
    return s * np.tan(rng.uniform(-1.3, 1.3, (count, model.m)))


def constant_sum_value(evaluation: MomentEvaluation) -> float:
    """AR + S_lambda_lambda at one evaluation"""
    return evaluation.scaled_objective + identification_statistic(evaluation)


def constant_sum(model: MomentModel, *, probes: int = CONSTANT_SUM_PROBES, tolerance: float = 1e-8) -> float:
    """d = T f'V^-1 f + T vec(D)'V_theta_theta.f^-1 vec(D), constant over theta for linear Kronecker models

    :exception StructureViolationError: d varies over the probed values
    """
    values = np.array([constant_sum_value(evaluate(model, theta)) for theta in _probe_thetas(model, probes)])
    d = float(np.median(values))
    spread = float(values.max() - values.min())
    if spread > tolerance * d:
        raise StructureViolationError(
            f"AR + identification statistic varies by {spread:.3e} over {probes} probes (d={d:.6g}): "
            f"{model.name} model is not linear with Kronecker covariances"
        )
    return d


def _ar_times_trace(model: MomentModel, theta: float, d: float) -> float:
    evaluation = evaluate(model, np.array([theta]))
    return (evaluation.scaled_objective - d / 2.0) * np.trace(evaluation.V_ff)


def drlm_maximizers(model: MomentModel, d: Optional[float] = None) -> List[float]:
    """Parameter values where the DRLM statistic is maximal: the real solutions of AR(theta) = d / 2

    (AR(theta) - d/2) tr V_ff(theta) is a quadratic polynomial in theta for linear Kronecker models. It is identified
    from three evaluations and solved exactly.
    """
    if model.m != 1 or not (model.is_linear and model.kronecker):
        raise UnsupportedError("DRLM maximizers are available for linear one parameter models with iid covariances")
    if d is None:
        d = constant_sum(model)
    step = atan_scale(model)
    values = np.array([_ar_times_trace(model, t, d) for t in (-step, 0.0, step)])
    c0 = values[1]
    c1 = (values[2] - values[0]) / (2 * step)
    c2 = (values[2] + values[0] - 2 * values[1]) / (2 * step * step)
    coefficients = np.array([c2, c1, c0])
    coefficients[np.abs(coefficients) < 1e-14 * np.abs(coefficients).max()] = 0.0
    roots = np.roots(np.trim_zeros(coefficients, "f")) if np.any(coefficients[:2]) else np.array([])
    real = [float(r.real) for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r.real))]
    return sorted(real)


def enhancement_path(theta1: np.ndarray, cue: np.ndarray, scale: float, points: int) -> np.ndarray:
    """points from theta1 to the CUE: in psi space for one parameter or an infinite CUE, straight otherwise"""
    t = np.linspace(0.0, 1.0, points)[:, None]
    if theta1.shape[0] == 1 or not np.all(np.isfinite(cue)):
        psi1, psi_cue = to_psi(theta1, scale), np.clip(to_psi(cue, scale), -np.pi / 2 + 1e-9, np.pi / 2 - 1e-9)
        return to_theta(psi1 + t * (psi_cue - psi1), scale)
    return theta1 + t * (cue - theta1)


def _margin(model, theta, policy) -> Tuple[float, Optional[TestResult]]:
    """DRLM minus its critical value, -inf where undefined"""
    try:
        result = drlm(evaluate(model, theta), policy)
    except DrgmmError:
        return -np.inf, None
    return result.value - result.critical_value, result


def power_enhanced_test(
    model: MomentModel,
    theta1,
    policy: CriticalValuePolicy = CONDITIONAL_POLICY,
    *,
    cue: Optional[np.ndarray] = None,
    config: Optional[SolverConfig] = None,
    points: int = SEGMENT_POINTS,
) -> TestResult:
    """DRLM test with the power improvement rule

    theta1 is rejected when the DRLM statistic is significant at theta1 or anywhere on the line from theta1 to the
    CUE. The line is sampled at `points` values, the best one is refined by a bounded search, and for one parameter
    Kronecker models the analytic DRLM maximizers on the line are added. The reported value and critical value are
    those of the most significant point, the statistic at theta1 is kept in extras.
    """
    theta1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    config = config or DEFAULT_CONFIG
    if cue is None:
        cue = cue_estimate(model, config).cue
    cue = np.atleast_1d(np.asarray(cue, dtype=float))
    s = atan_scale(model, config)

    base_margin, base = _margin(model, theta1, policy)
    if base is None:
        # surfaces the evaluation or degeneracy error at theta1
        drlm(evaluate(model, theta1), policy)
    line = enhancement_path(theta1, cue, s, points)
    margins = np.array([_margin(model, theta, policy)[0] for theta in line])
    best = int(np.argmax(margins))
    best_theta, best_margin = line[best], margins[best]

    if 0 < best < points - 1:
        ends = (line[best - 1], line[best + 1])
        res = scipy.optimize.minimize_scalar(
            lambda u: -_margin(model, ends[0] + u * (ends[1] - ends[0]), policy)[0],
            bounds=(0.0, 1.0),
            method="bounded",
        )
        if -res.fun > best_margin:
            best_theta, best_margin = ends[0] + res.x * (ends[1] - ends[0]), -res.fun

    if model.m == 1 and model.is_linear and model.kronecker and np.isfinite(theta1[0]):
        lo, hi = sorted((to_psi(theta1[0], s), to_psi(cue[0], s)))
        for maximizer in drlm_maximizers(model):
            if lo <= to_psi(maximizer, s) <= hi:
                margin = _margin(model, np.array([maximizer]), policy)[0]
                if margin > best_margin:
                    best_theta, best_margin = np.array([maximizer]), margin

    if base_margin >= best_margin:
        best_theta, witness = theta1, base
    else:
        witness = _margin(model, best_theta, policy)[1]
    return build_result(
        "drlm_enhanced",
        witness.value,
        witness.df,
        witness.critical_value,
        policy=policy.kind,
        conditioning=witness.conditioning_value,
        theta1_value=base.value,
        theta1_critical_value=base.critical_value,
        witness=best_theta,
    )
