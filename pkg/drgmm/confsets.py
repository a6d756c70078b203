# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Confidence sets by test inversion and the Fama-MacBeth two pass estimator.

Sets are computed on psi = atan(theta / s) grids, so an accepted run touching the end of the grid is reported as
unbounded. One dimensional boundaries are refined by bisection in psi.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats
from tqdm import tqdm

from drgmm import linalg
from drgmm.errors import (
    ConvergenceError,
    DegenerateTestError,
    EvaluationError,
    InputError,
    SingularCovarianceError,
    UnsupportedError,
)
from drgmm.models import FactorData, factor_model
from drgmm.moments import MomentModel, evaluate
from drgmm.solver import (
    DEFAULT_CONFIG,
    SolverConfig,
    atan_scale,
    cue_estimate,
    enhancement_path,
    psi_grid,
    to_psi,
    to_theta,
)
from drgmm.stats import CONDITIONAL_POLICY, FIXED_POLICY, CriticalValuePolicy, run_statistics

logger = logging.getLogger(__name__)

ENHANCED = "drlm_enhanced"
CONFSET_STATISTICS = ("drlm", "klm", "ar", "lr", ENHANCED)
GRID_SIZE_1D = 4001
GRID_SIZE_2D = 101
BISECTION_TOLERANCE = 1e-4

Interval = Tuple[float, float]

# failures of the test at a single point; usage errors such as an unsupported policy propagate
NUMERICAL_ERRORS = (SingularCovarianceError, DegenerateTestError, EvaluationError, ConvergenceError)


def _encode(x: float):
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _decode(x) -> float:
    return float(x)


def _margin_function(model: MomentModel, statistic: str, policy: CriticalValuePolicy, ridge: bool) -> Callable:
    """theta -> (statistic, critical value), (nan, nan) where the test cannot be computed"""

    def margin(theta) -> Tuple[float, float]:
        try:
            result = run_statistics(evaluate(model, np.atleast_1d(theta), ridge=ridge), (statistic,), policy)[0]
        except NUMERICAL_ERRORS as e:
            logger.debug("%s not computed at %s: %s", statistic, theta, e)
            return np.nan, np.nan
        return result.value, result.critical_value

    return margin


def _evaluate_grid(
    margin: Callable, thetas: np.ndarray, workers: int, with_progress_bar: bool, desc: str
) -> Tuple[np.ndarray, np.ndarray]:
    with ThreadPoolExecutor(max_workers=workers) as pool:
        out = list(tqdm(pool.map(margin, thetas), total=len(thetas), disable=not with_progress_bar, desc=desc))
    out = np.array(out, dtype=float).reshape(len(thetas), 2)
    return out[:, 0], out[:, 1]


def _rejected(values: np.ndarray, critical_values: np.ndarray, statistic: str) -> np.ndarray:
    """points where the test is not computed are kept in the set"""
    skipped = int(np.isnan(values).sum())
    if skipped:
        logger.warning(
            "%s not computed at %d of %d grid points, they are kept in the set", statistic, skipped, values.size
        )
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(values, nan=-np.inf) > np.nan_to_num(critical_values, nan=np.inf)


def _runs(accepted: np.ndarray) -> List[Tuple[int, int]]:
    """(first, last) index of each run of True values"""
    padded = np.concatenate([[False], accepted, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def _is_accepted(margin: Callable, theta: float) -> bool:
    value, cv = margin(np.array([theta]))
    return not value > cv


def _bisect(margin: Callable, psi_rejected: float, psi_accepted: float, scale: float, tolerance: float) -> float:
    while abs(psi_accepted - psi_rejected) > tolerance:
        mid = 0.5 * (psi_rejected + psi_accepted)
        if _is_accepted(margin, to_theta(mid, scale)):
            psi_accepted = mid
        else:
            psi_rejected = mid
    return float(to_theta(0.5 * (psi_rejected + psi_accepted), scale))


def _enhance_1d(rejected: np.ndarray, psi: np.ndarray, psi_cue: float) -> np.ndarray:
    """rejected anywhere on the grid between a point and the CUE"""
    c = int(np.searchsorted(psi, psi_cue))
    out = rejected.copy()
    out[c:] = np.logical_or.accumulate(rejected[c:])
    out[:c] = np.logical_or.accumulate(rejected[:c][::-1])[::-1]
    return out


@dataclass(frozen=True, eq=False)
class ConfidenceSet1D:
    """Sorted disjoint closed intervals of the extended real line

    :param curve: statistic and critical value on the grid, columns theta, psi, value, critical_value, accepted
    """

    intervals: Tuple[Interval, ...]
    level: float
    statistic: str
    policy: str
    scale: float
    grid_size: int
    tolerance: float
    curve: pd.DataFrame

    @property
    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    @property
    def is_bounded(self) -> bool:
        return all(np.isfinite(lo) and np.isfinite(hi) for lo, hi in self.intervals)

    def contains(self, theta: float) -> bool:
        return any(lo <= theta <= hi for lo, hi in self.intervals)

    def to_dict(self) -> Dict:
        return {
            "statistic": self.statistic,
            "policy": self.policy,
            "level": self.level,
            "intervals": [[_encode(lo), _encode(hi)] for lo, hi in self.intervals],
            "grid": {"size": self.grid_size, "scale": self.scale, "tolerance": self.tolerance},
        }

    @classmethod
    def intervals_from_dict(cls, payload: Dict) -> Tuple[Interval, ...]:
        return tuple((_decode(lo), _decode(hi)) for lo, hi in payload["intervals"])

    def to_json(self, path: str, manifest: Optional[str] = None):
        payload = self.to_dict()
        if manifest is not None:
            payload["manifest"] = manifest
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)


def invert_1d(
    model: MomentModel,
    statistic: str = "drlm",
    policy: CriticalValuePolicy = CONDITIONAL_POLICY,
    *,
    grid_size: int = GRID_SIZE_1D,
    tolerance: float = BISECTION_TOLERANCE,
    config: Optional[SolverConfig] = None,
    cue: Optional[float] = None,
    workers: int = 1,
) -> ConfidenceSet1D:
    """Values of a single parameter not rejected by the test

    The statistic is evaluated on grid_size points of psi in (-pi/2, pi/2). For the power enhanced DRLM test a point
    is rejected when the DRLM test rejects anywhere between it and the CUE, so its set is the run of DRLM accepted
    points around the CUE. An all rejected grid gives the empty set.

    :param cue: CUE of the model, searched when needed and not given
    """
    assert model.m == 1, f"one dimensional inversion needs m=1, got m={model.m}"
    assert statistic in CONFSET_STATISTICS, f"unknown statistic {statistic!r}, choose from {CONFSET_STATISTICS}"
    assert grid_size >= 3 and tolerance > 0, "need at least three grid points and a positive tolerance"
    config = config or DEFAULT_CONFIG
    s = atan_scale(model, config)
    margin = _margin_function(model, "drlm" if statistic == ENHANCED else statistic, policy, config.ridge)
    psi = psi_grid(grid_size)
    thetas = to_theta(psi, s)
    values, cvs = _evaluate_grid(margin, thetas, workers, config.with_progress_bar, f"{statistic} grid")
    rejected = _rejected(values, cvs, statistic)
    if statistic == ENHANCED:
        if cue is None:
            cue = cue_estimate(model, config).cue[0]
        rejected = _enhance_1d(rejected, psi, float(to_psi(cue, s)))

    intervals = []
    for first, last in _runs(~rejected):
        lo = -np.inf if first == 0 else _bisect(margin, psi[first - 1], psi[first], s, tolerance)
        hi = np.inf if last == grid_size - 1 else _bisect(margin, psi[last + 1], psi[last], s, tolerance)
        intervals.append((lo, hi))
    curve = pd.DataFrame(
        {"theta": thetas, "psi": psi, "value": values, "critical_value": cvs, "accepted": ~rejected}
    )
    logger.info("%s confidence set: %s", statistic, intervals or "empty")
    return ConfidenceSet1D(
        tuple(intervals), 1.0 - policy.alpha, statistic, policy.kind, s, grid_size, tolerance, curve
    )


def _grid_intervals(accepted: np.ndarray, axis: np.ndarray) -> Tuple[Interval, ...]:
    last = accepted.shape[0] - 1
    return tuple(
        (-np.inf if a == 0 else float(axis[a]), np.inf if b == last else float(axis[b])) for a, b in _runs(accepted)
    )


def _grid_index(psi: np.ndarray, n: int) -> np.ndarray:
    """nearest index of psi_grid(n)"""
    step = np.pi / (n + 1)
    return np.clip(np.rint((psi + np.pi / 2) / step - 1).astype(int), 0, n - 1)


def _enhance_2d(rejected: np.ndarray, thetas: np.ndarray, cue: np.ndarray, scale: float) -> np.ndarray:
    """a cell is rejected when a cell on its path to the CUE is rejected"""
    n = rejected.shape[0]
    out = rejected.copy()
    for i, j in np.argwhere(~rejected):
        path = enhancement_path(thetas[i, j], cue, scale, n)
        index = _grid_index(to_psi(path, scale), n)
        out[i, j] = bool(rejected[index[:, 0], index[:, 1]].any())
    return out


@dataclass(frozen=True, eq=False)
class ConfidenceSet2D:
    """Acceptance mask over a two dimensional atan grid and its projections on the axes

    mask[i, j] refers to (axes[0][i], axes[1][j]).
    """

    axes: Tuple[np.ndarray, np.ndarray]
    mask: np.ndarray
    values: np.ndarray
    critical_values: np.ndarray
    projections: Tuple[Tuple[Interval, ...], Tuple[Interval, ...]]
    level: float
    statistic: str
    policy: str
    scale: float

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def contains(self, theta: Sequence[float]) -> bool:
        n = self.mask.shape[0]
        i, j = _grid_index(to_psi(np.asarray(theta, dtype=float), self.scale), n)
        return bool(self.mask[i, j])

    def to_frame(self) -> pd.DataFrame:
        t1, t2 = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return pd.DataFrame(
            {
                "theta_1": t1.ravel(),
                "theta_2": t2.ravel(),
                "value": self.values.ravel(),
                "critical_value": self.critical_values.ravel(),
                "accepted": self.mask.ravel(),
            }
        )

    def to_csv(self, path: str, manifest: Optional[str] = None):
        with open(path, "w", newline="") as f:
            if manifest is not None:
                f.write(f"# manifest: {manifest}\n")
            self.to_frame().to_csv(f, index=False)

    def to_dict(self) -> Dict:
        return {
            "statistic": self.statistic,
            "policy": self.policy,
            "level": self.level,
            "projections": [[[_encode(lo), _encode(hi)] for lo, hi in axis] for axis in self.projections],
            "grid": {"size": int(self.mask.shape[0]), "scale": self.scale},
        }


def invert_2d(
    model: MomentModel,
    statistic: str = "drlm",
    policy: CriticalValuePolicy = FIXED_POLICY,
    *,
    grid_size: int = GRID_SIZE_2D,
    config: Optional[SolverConfig] = None,
    cue: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> ConfidenceSet2D:
    """Joint confidence set of two parameters on a grid_size x grid_size atan grid

    The projection on an axis is the union of the accepted cells over the other axis, reported as grid intervals.
    """
    assert model.m == 2, f"two dimensional inversion needs m=2, got m={model.m}"
    assert statistic in CONFSET_STATISTICS, f"unknown statistic {statistic!r}, choose from {CONFSET_STATISTICS}"
    if statistic == "lr":
        raise UnsupportedError("the conditional LR test is implemented for one parameter")
    if policy.conditional and statistic in ("drlm", ENHANCED):
        raise UnsupportedError("conditional DRLM critical values are calibrated for one parameter, use the chi2 policy")
    config = config or DEFAULT_CONFIG
    s = atan_scale(model, config)
    psi = psi_grid(grid_size)
    axis = to_theta(psi, s)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    margin = _margin_function(model, "drlm" if statistic == ENHANCED else statistic, policy, config.ridge)
    values, cvs = _evaluate_grid(
        margin, grid.reshape(-1, 2), workers, config.with_progress_bar, f"{statistic} joint grid"
    )
    values, cvs = values.reshape(grid_size, grid_size), cvs.reshape(grid_size, grid_size)
    rejected = _rejected(values, cvs, statistic)
    if statistic == ENHANCED:
        cue = cue_estimate(model, config).cue if cue is None else np.asarray(cue, dtype=float)
        rejected = _enhance_2d(rejected, grid, cue, s)
    mask = ~rejected
    projections = (_grid_intervals(mask.any(axis=1), axis), _grid_intervals(mask.any(axis=0), axis))
    logger.info("%s joint confidence set: %d of %d cells accepted", statistic, int(mask.sum()), mask.size)
    return ConfidenceSet2D(
        (axis, axis.copy()), mask, values, cvs, projections, 1.0 - policy.alpha, statistic, policy.kind, s
    )


class FamaMacBeth(NamedTuple):
    """Two pass estimates, FM t statistics, FM standard errors and estimate +- z s.e. intervals (m x 2)"""

    lambda_hat: np.ndarray
    fm_t: np.ndarray
    se: np.ndarray
    intervals: np.ndarray


def fm_two_pass(data: FactorData, level: float = 0.95) -> FamaMacBeth:
    """Fama-MacBeth two pass procedure

    Pass one estimates the betas by time series OLS, pass two regresses each period's returns on the betas. The
    estimate is the mean of the per period premia and its standard error comes from their time series.

    :exception InputError: the beta matrix is rank deficient
    """
    R = data.excess_returns()
    beta = factor_model(data).beta
    gram = beta.T @ beta
    if not linalg.is_positive_definite(gram):
        raise InputError("beta matrix is rank deficient")
    premia = R @ beta @ linalg.inverse(gram, "beta' beta")
    lambda_hat = premia.mean(axis=0)
    se = premia.std(axis=0, ddof=1) / np.sqrt(data.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        fm_t = lambda_hat / se
    z = scipy.stats.norm.ppf(0.5 + level / 2)
    intervals = np.column_stack([lambda_hat - z * se, lambda_hat + z * se])
    logger.debug("Fama-MacBeth premia %s, t %s", lambda_hat, fm_t)
    return FamaMacBeth(lambda_hat, fm_t, se, intervals)
