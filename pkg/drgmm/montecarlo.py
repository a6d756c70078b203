# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Seeded replication engine for size surfaces, power curves, J statistic distributions and CRRA experiments.

A unit of work (a cell of a grid, or a block of CRRA replications) draws from its own counter based stream keyed by
its position, so results do not depend on the number of workers. Rejections are reduced by integer counting.
"""

import itertools
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from drgmm.errors import DrgmmError, DrgmmWarning, InputError, UnsupportedError
from drgmm.limitdist import LimitExperimentParams, sample_limit_drlm, standard_error
from drgmm.models import CrraDgpParams, crra_dgp_sample, crra_model, crra_pseudo_true, load_crra_calibration
from drgmm.moments import evaluate
from drgmm.stats import CriticalValuePolicy, FIXED_CHI2, chi2_critical_value, drlm, gmm_ar, klm
from drgmm.streams import default_seed, replication_rng

logger = logging.getLogger(__name__)

SIZE = "size"
POWER = "power"
JSTAT = "jstat"
CRRA = "crra"
KINDS = (SIZE, POWER, JSTAT, CRRA)

DEFAULT_GRID = (0.0, 1.0, 4.4, 10.0, 30.0, 100.0)
DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.linspace(-5.0, 5.0, 21))
STRONG_IDENTIFICATION = 100.0
DEFAULT_REPS = {SIZE: 10_000, POWER: 5_000, JSTAT: 10_000}
CRRA_BLOCK = 50
CDF_POINTS = 201
CRRA_STATISTICS = ("drlm", "klm", "ar")
GRID_FIELDS = ("mu_sq_grid", "d_sq_grid", "id_strengths", "lambda_grid", "c_grid", "c_tilde_grid", "gamma_offsets")

PRESETS = {
    "no-misspecification": {"misspec": 0.0},
    "weak-misspecification": {"misspec": 4.4},
    "mild-misspecification": {"misspec": 10.0},
    "mild-misspecification-n5": {"N": 5, "misspec": 2.5},
}


def _increasing(name: str, values: Sequence[float]):
    assert len(values) >= 1, f"{name} is empty"
    assert all(b > a for a, b in zip(values, values[1:])), f"{name} has to be strictly increasing, got {values}"


@dataclass(frozen=True)
class SimSpec:
    """Settings of a simulation experiment

    Grids over the squared lengths |mu_bar|^2 (misspecification) and |D_bar|^2 (identification strength) of the limit
    experiment, the drift lambda* of the pseudo-true value for power curves and (c, c_tilde, gamma offset) for CRRA.

    :param reps: replications per cell, DEFAULT_REPS[kind] or the calibration's count for CRRA when None
    :param id_strengths: |D_bar|^2 of the curves, {0, misspec, 100} when None
    :param T: CRRA sample size, the calibration's when None
    :param calibration: CRRA calibration file, the shipped one when None
    :param workers: threads evaluating cells, results do not depend on it
    """

    kind: str = SIZE
    N: int = 25
    m: int = 1
    reps: Optional[int] = None
    alpha: float = 0.05
    seed: int = field(default_factory=default_seed)
    policy: str = FIXED_CHI2
    mu_sq_grid: Tuple[float, ...] = DEFAULT_GRID
    d_sq_grid: Tuple[float, ...] = DEFAULT_GRID
    misspec: float = 4.4
    id_strengths: Optional[Tuple[float, ...]] = None
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    c_grid: Tuple[float, ...] = (0.0,)
    c_tilde_grid: Tuple[float, ...] = (1.0,)
    gamma_offsets: Tuple[float, ...] = (0.0,)
    T: Optional[int] = None
    calibration: Optional[str] = None
    workers: int = 1
    with_progress_bar: bool = False

    def __post_init__(self):
        assert self.kind in KINDS, f"unknown experiment kind {self.kind!r}, choose from {KINDS}"
        assert self.N > self.m >= 1, f"need N > m >= 1, got N={self.N}, m={self.m}"
        assert self.reps is None or self.reps >= 1, f"reps has to be positive, got {self.reps}"
        assert 0.0 < self.alpha < 1.0, f"alpha has to be in (0, 1), got {self.alpha}"
        assert 0 <= self.seed < 2 ** 64, f"seed has to be a 64 bit unsigned integer, got {self.seed}"
        assert self.misspec >= 0, f"misspec has to be non negative, got {self.misspec}"
        assert self.workers >= 1, f"workers has to be positive, got {self.workers}"
        assert self.T is None or self.T >= 2, f"T has to be at least two, got {self.T}"
        for name in GRID_FIELDS:
            value = getattr(self, name)
            if value is not None:
                value = tuple(float(v) for v in value)
                object.__setattr__(self, name, value)
                _increasing(name, value)
        assert min(self.mu_sq_grid) >= 0 and min(self.d_sq_grid) >= 0, "squared lengths have to be non negative"
        policy = self.critical_value_policy
        if policy.conditional and self.m != 1:
            raise UnsupportedError(f"conditional critical values are calibrated for m=1, got m={self.m}")
        if self.kind in (POWER, CRRA) and self.m != 1:
            raise UnsupportedError(f"{self.kind} experiments are implemented for one parameter, got m={self.m}")

    @property
    def critical_value_policy(self) -> CriticalValuePolicy:
        return CriticalValuePolicy(self.policy, self.alpha)

    @property
    def identification_strengths(self) -> Tuple[float, ...]:
        if self.id_strengths is not None:
            return self.id_strengths
        return tuple(sorted({0.0, self.misspec, STRONG_IDENTIFICATION}))

    def replications(self, settings: Optional[Dict[str, Any]] = None) -> int:
        if self.reps is not None:
            return self.reps
        if self.kind == CRRA:
            return int((settings or {}).get("reps", 1000))
        return DEFAULT_REPS[self.kind]

    @classmethod
    def preset(cls, name: str, **overrides) -> "SimSpec":
        if name not in PRESETS:
            raise InputError(f"unknown preset {name!r}, choose from {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self) -> Dict[str, Any]:
        """flat key/value representation, grids as lists"""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, flat: Dict[str, Any]) -> "SimSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise InputError(f"unknown simulation settings {unknown}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in flat.items()})

    def dump(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "SimSpec":
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read simulation settings {path}: {e}") from e


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Long table, one row per cell and statistic with its rejection frequency and Monte Carlo standard error"""

    spec: SimSpec
    frame: pd.DataFrame

    def frequency(self, statistic: str, **axes) -> float:
        rows = self.frame[self.frame["statistic"] == statistic]
        for name, value in axes.items():
            rows = rows[np.isclose(rows[name], value)]
        assert len(rows) == 1, f"{len(rows)} rows match {statistic} {axes}"
        return float(rows["frequency"].iloc[0])

    def to_csv(self, path: str, manifest: Optional[str] = None):
        with open(path, "w", newline="") as f:
            if manifest is not None:
                f.write(f"# manifest: {manifest}\n")
            self.frame.to_csv(f, index=False)


class RejectionSurface(SimulationResult):
    """columns mu_sq, d_sq, statistic, frequency, se, reps, size_measurement"""


class PowerCurves(SimulationResult):
    """columns d_sq, lambda_star, statistic, frequency, se, reps"""


@dataclass(frozen=True, eq=False)
class JstatCdf(SimulationResult):
    """rejection table plus the empirical distribution function, columns d_sq, x, cdf"""

    cdf: pd.DataFrame = None


class CrraExperiment(SimulationResult):
    """columns c, c_tilde, gamma_star, gamma, offset, statistic, frequency, se, reps, failures"""


def read_result(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def _run_units(work: Callable, units: List, spec: SimSpec, desc: str) -> List:
    """work over units in a thread pool, results in unit order"""
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        return list(tqdm(pool.map(work, units), total=len(units), disable=not spec.with_progress_bar, desc=desc))


def _rows(axes: Dict[str, Any], rejections: Dict[str, float], reps: int) -> List[Dict[str, Any]]:
    return [
        {**axes, "statistic": name, "frequency": p, "se": standard_error(p, reps), "reps": reps}
        for name, p in rejections.items()
    ]


def run_size_surface(spec: SimSpec) -> RejectionSurface:
    """Rejection frequencies under the null over the (|mu_bar|^2, |D_bar|^2) grid

    Cells with |mu_bar| > |D_bar| are reported with size_measurement False: the population minimizer is at infinity
    there, so the power enhanced test is not measured at a valid hypothesized value.
    """
    policy = spec.critical_value_policy
    reps = spec.replications()
    cells = list(itertools.product(enumerate(spec.mu_sq_grid), enumerate(spec.d_sq_grid)))

    def work(cell):
        (i, mu_sq), (j, d_sq) = cell
        params = LimitExperimentParams.from_lengths(spec.N, mu_sq, d_sq, m=spec.m)
        _, sample = sample_limit_drlm(params, reps, spec.seed, policy, key=(i, j))
        axes = {"mu_sq": mu_sq, "d_sq": d_sq, "size_measurement": d_sq >= mu_sq}
        return _rows(axes, sample.rejections(policy), reps)

    rows = [row for cell_rows in _run_units(work, cells, spec, "size surface") for row in cell_rows]
    frame = pd.DataFrame(rows)
    flagged = frame[(frame["statistic"] == "drlm_enhanced") & ~frame["size_measurement"]]
    if len(flagged):
        warnings.warn(
            f"{len(flagged)} cells have |mu_bar| > |D_bar|, the enhanced DRLM frequencies there are not size "
            "measurements",
            DrgmmWarning,
        )
    logger.info("size surface: %d cells, %d replications each", len(cells), reps)
    return RejectionSurface(spec, frame)


def run_power_curve(spec: SimSpec) -> PowerCurves:
    """Rejection frequencies of H0: lambda = 0 against the drift lambda* of the pseudo-true value

    One curve per identification strength at misspecification spec.misspec.
    """
    policy = spec.critical_value_policy
    reps = spec.replications()
    cells = list(itertools.product(enumerate(spec.identification_strengths), enumerate(spec.lambda_grid)))

    def work(cell):
        (i, d_sq), (j, lambda_star) = cell
        params = LimitExperimentParams.from_lengths(spec.N, spec.misspec, d_sq, lambda_star=lambda_star)
        _, sample = sample_limit_drlm(params, reps, spec.seed, policy, key=(i, j))
        return _rows({"d_sq": d_sq, "lambda_star": lambda_star}, sample.rejections(policy), reps)

    rows = [row for cell_rows in _run_units(work, cells, spec, "power curves") for row in cell_rows]
    logger.info("power curves: misspecification %.4g, %d points", spec.misspec, len(cells))
    return PowerCurves(spec, pd.DataFrame(rows))


def run_jstat_cdf(spec: SimSpec, points: int = CDF_POINTS) -> JstatCdf:
    """Distribution of the J statistic in the limit experiment at misspecification spec.misspec

    The rejection table holds the frequency above the chi2(N - m) critical value per identification strength.
    """
    reps = spec.replications()
    cv = chi2_critical_value(spec.N - spec.m, spec.alpha)
    x = np.linspace(0.0, 3.0 * cv, points)
    cells = list(enumerate(spec.identification_strengths))

    def work(cell):
        i, d_sq = cell
        params = LimitExperimentParams.from_lengths(spec.N, spec.misspec, d_sq, m=spec.m)
        _, sample = sample_limit_drlm(params, reps, spec.seed, key=(i,))
        j = np.sort(sample.j)
        cdf = np.searchsorted(j, x, side="right") / reps
        return float(np.mean(sample.j > cv)), cdf

    outputs = _run_units(work, cells, spec, "J distribution")
    rows, curves = [], []
    for (_, d_sq), (p, cdf) in zip(cells, outputs):
        rows.extend(_rows({"d_sq": d_sq, "critical_value": cv}, {"j": p}, reps))
        curves.append(pd.DataFrame({"d_sq": d_sq, "x": x, "cdf": cdf}))
    return JstatCdf(spec, pd.DataFrame(rows), pd.concat(curves, ignore_index=True))


@dataclass(frozen=True)
class _CrraCell:
    index: int
    params: CrraDgpParams
    gamma_star: float


def _crra_block(cell: _CrraCell, block: int, reps: int, T: int, spec: SimSpec) -> Tuple[np.ndarray, np.ndarray]:
    """rejection counts (offsets x statistics) and failure counts (offsets) of one block of replications"""
    policy = spec.critical_value_policy
    gammas = cell.gamma_star + np.asarray(spec.gamma_offsets)
    counts = np.zeros((gammas.shape[0], len(CRRA_STATISTICS)), dtype=np.int64)
    failures = np.zeros(gammas.shape[0], dtype=np.int64)
    start = block * CRRA_BLOCK
    for rep in range(start, min(start + CRRA_BLOCK, reps)):
        consumption, returns = crra_dgp_sample(cell.params, T, replication_rng(spec.seed, cell.index, rep))
        model = crra_model(consumption, returns, cell.params.delta0)
        for g, gamma in enumerate(gammas):
            try:
                evaluation = evaluate(model, [gamma])
                results = (drlm(evaluation, policy), klm(evaluation, policy), gmm_ar(evaluation, policy))
            except DrgmmError as e:
                logger.debug("replication %d at gamma=%.4g failed: %s", rep, gamma, e)
                failures[g] += 1
                continue
            counts[g] += [r.reject for r in results]
    return counts, failures


def run_crra_experiment(spec: SimSpec, base: Optional[CrraDgpParams] = None) -> CrraExperiment:
    """Finite sample rejection frequencies of H0: gamma = gamma*(c, c_tilde) + offset in the CRRA model

    For each (c, c_tilde) the pseudo-true value comes from the population objective, data are drawn from the
    log-normal design and the DRLM, KLM and GMM-AR tests are evaluated at each hypothesized value. Replications that
    cannot be evaluated are counted in `failures` and left out of the frequencies.
    """
    calibrated, settings = load_crra_calibration(spec.calibration)
    base = base or calibrated
    T = spec.T or int(settings.get("T", 1000))
    reps = spec.replications(settings)
    cells = []
    for index, (c, c_tilde) in enumerate(itertools.product(spec.c_grid, spec.c_tilde_grid)):
        params = base.with_misspecification(c, c_tilde)
        gamma_star = crra_pseudo_true(params).gamma_star
        logger.info("CRRA cell c=%.4g c_tilde=%.4g: pseudo-true gamma %.4f", c, c_tilde, gamma_star)
        cells.append(_CrraCell(index, params, gamma_star))
    blocks = -(-reps // CRRA_BLOCK)
    units = list(itertools.product(cells, range(blocks)))
    outputs = _run_units(lambda unit: _crra_block(unit[0], unit[1], reps, T, spec), units, spec, "CRRA replications")

    rows = []
    for cell in cells:
        parts = [out for (c, _), out in zip(units, outputs) if c is cell]
        counts = sum(p[0] for p in parts)
        failures = sum(p[1] for p in parts)
        for g, offset in enumerate(spec.gamma_offsets):
            valid = int(reps - failures[g])
            for s, name in enumerate(CRRA_STATISTICS):
                p = float(counts[g, s] / valid) if valid else np.nan
                rows.append(
                    {
                        "c": cell.params.c,
                        "c_tilde": cell.params.c_tilde,
                        "gamma_star": cell.gamma_star,
                        "gamma": cell.gamma_star + offset,
                        "offset": offset,
                        "statistic": name,
                        "frequency": p,
                        "se": standard_error(p, valid) if valid else np.nan,
                        "reps": valid,
                        "failures": int(failures[g]),
                    }
                )
    return CrraExperiment(spec, pd.DataFrame(rows))


RUNNERS = {SIZE: run_size_surface, POWER: run_power_curve, JSTAT: run_jstat_cdf, CRRA: run_crra_experiment}


def run(spec: SimSpec) -> SimulationResult:
    return RUNNERS[spec.kind](spec)
