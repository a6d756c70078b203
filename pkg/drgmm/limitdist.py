# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Limit experiment of the score statistics.

In the limit, the whitened moment and recentered Jacobian at the tested value are independent normals
    f* ~ N(mu_bar, I_N),  D* ~ N(D_bar, I_N x I_m),  mu_bar' D_bar = 0,
and every statistic is a function of (f*, D*). For one parameter the pair (f(phi), D(phi)) seen from another tested
value is a rotation of (f*, D*) by phi, which gives the CUE, the DRLM maximizers and the power enhancement path in
closed form.
"""

import logging
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple, Sequence

import numpy as np
import scipy.linalg

from drgmm import linalg
from drgmm.errors import UnsupportedError
from drgmm.moments import MomentEvaluation
from drgmm.stats import (
    CriticalValuePolicy,
    FIXED_POLICY,
    chi2_critical_value,
    clr_critical_values,
    conditional_cv_array,
)
from drgmm.streams import replication_rng

logger = logging.getLogger(__name__)

BLOCK_SIZE = 500
PATH_POINTS = 201
DEGENERATE_GAP = 1e-10


@dataclass(frozen=True, eq=False)
class LimitExperimentParams:
    """Means of the limit experiment

    :param mu_bar: N vector, misspecification
    :param D_bar: N x m matrix, identification, orthogonal to mu_bar
    :param lambda_star: distance between the pseudo-true and the tested value (one parameter only)
    :param Q_FF: m x m factor second moment, identity by default
    """

    mu_bar: np.ndarray
    D_bar: np.ndarray
    lambda_star: np.ndarray = None
    Q_FF: np.ndarray = None

    def __post_init__(self):
        mu_bar = np.asarray(self.mu_bar, dtype=float).reshape(-1)
        D_bar = np.asarray(self.D_bar, dtype=float)
        if D_bar.ndim == 1:
            D_bar = D_bar[:, None]
        n, m = D_bar.shape
        assert mu_bar.shape == (n,), f"mu_bar has {mu_bar.shape[0]} entries, D_bar has {n} rows"
        assert n > m, f"need N > m, got N={n}, m={m}"
        lambda_star = np.zeros(m) if self.lambda_star is None else np.atleast_1d(np.asarray(self.lambda_star, float))
        Q_FF = np.eye(m) if self.Q_FF is None else np.atleast_2d(np.asarray(self.Q_FF, dtype=float))
        assert lambda_star.shape == (m,), f"lambda_star has to have {m} entries"
        assert Q_FF.shape == (m, m), f"Q_FF has to be {m}x{m}"
        assert m == 1 or not np.any(lambda_star), "drifting pseudo-true values are supported for m=1 only"
        cross = mu_bar @ D_bar
        scale = max(1.0, float(np.linalg.norm(mu_bar) * np.linalg.norm(D_bar)))
        assert np.all(np.abs(cross) <= 1e-12 * scale), f"mu_bar and D_bar have to be orthogonal, got {cross}"
        for name, value in (("mu_bar", mu_bar), ("D_bar", D_bar), ("lambda_star", lambda_star), ("Q_FF", Q_FF)):
            object.__setattr__(self, name, value)

    @property
    def N(self) -> int:
        return self.D_bar.shape[0]

    @property
    def m(self) -> int:
        return self.D_bar.shape[1]

    @classmethod
    def from_lengths(
        cls, N: int, mu_sq: float, d_sq: float, *, m: int = 1, lambda_star: float = 0.0
    ) -> "LimitExperimentParams":
        """mu_bar along the first axis with squared length mu_sq, each column of D_bar on its own axis with d_sq"""
        assert N > m, f"need N > m, got N={N}, m={m}"
        assert mu_sq >= 0 and d_sq >= 0, "squared lengths have to be non negative"
        mu_bar = np.zeros(N)
        mu_bar[0] = np.sqrt(mu_sq)
        D_bar = np.zeros((N, m))
        D_bar[1 : m + 1, :] = np.sqrt(d_sq) * np.eye(m)
        return cls(mu_bar, D_bar, lambda_star=np.full(m, lambda_star))


def drifted_means(lambda_star: float, mu_bar: np.ndarray, D_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Means of (f*, D*) at the tested value when the pseudo-true value drifts by lambda_star

    mean_f = (mu_bar - D_bar lambda*) / sqrt(1 + lambda*^2), mean_D = (D_bar + mu_bar lambda*) / sqrt(1 + lambda*^2)
    """
    mu_bar = np.asarray(mu_bar, dtype=float).reshape(-1)
    D_bar = np.asarray(D_bar, dtype=float).reshape(-1)
    norm = 1.0 / np.sqrt(1.0 + lambda_star ** 2)
    return norm * (mu_bar - D_bar * lambda_star), norm * (D_bar + mu_bar * lambda_star)


def _limit_means(params: LimitExperimentParams) -> Tuple[np.ndarray, np.ndarray]:
    if params.m == 1 and params.lambda_star[0] != 0.0:
        # rotation angle atan(lambda / sqrt(Q)) expressed as an equivalent unit Q drift
        drift = params.lambda_star[0] / np.sqrt(params.Q_FF[0, 0])
        mean_f, mean_d = drifted_means(drift, params.mu_bar, params.D_bar[:, 0])
        return mean_f, mean_d[:, None]
    return params.mu_bar, params.D_bar


def draw_limit_components(rng: np.random.Generator, reps: int, N: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """standard normal (psi_f, Psi_theta.f) of shapes (reps, N) and (reps, N, m)"""
    psi_f = rng.standard_normal((reps, N))
    psi_theta = rng.standard_normal((reps, N, m))
    return psi_f, psi_theta


@dataclass(frozen=True, eq=False)
class LimitSample:
    """Statistic streams of a limit experiment, one entry per replication"""

    N: int
    m: int
    ar: np.ndarray
    klm: np.ndarray
    drlm: np.ndarray
    rank: np.ndarray
    j: np.ndarray
    lr: Optional[np.ndarray] = None
    cross: Optional[np.ndarray] = None

    @property
    def reps(self) -> int:
        return self.ar.shape[0]

    @property
    def conditioning(self) -> np.ndarray:
        return np.maximum(self.ar, self.rank)

    def drlm_critical_values(self, policy: CriticalValuePolicy) -> np.ndarray:
        if policy.conditional:
            assert self.m == 1, "conditional critical values need m=1"
            return conditional_cv_array(self.conditioning)
        return np.full(self.reps, chi2_critical_value(self.m, policy.alpha))

    def enhanced_rejections(self, policy: CriticalValuePolicy, points: int = PATH_POINTS) -> np.ndarray:
        """DRLM significant anywhere on the rotation path from the tested value to the CUE"""
        assert self.m == 1 and self.cross is not None, "power enhancement in the limit needs m=1"
        a, b, d = self.ar, self.cross, self.rank
        phi_cue, maximizers = limit_stationary_angles_from_moments(a, b, d)
        t = np.linspace(0.0, 1.0, points)
        phis = np.column_stack([phi_cue[:, None] * t[None, :], maximizers])
        lo, hi = np.minimum(0.0, phi_cue)[:, None], np.maximum(0.0, phi_cue)[:, None]
        inside = (phis >= lo - 1e-15) & (phis <= hi + 1e-15)
        total = (a + d)[:, None]
        half_diff = 0.5 * (a - d)[:, None]
        moment_sq = 0.5 * total + half_diff * np.cos(2 * phis) + b[:, None] * np.sin(2 * phis)
        score = b[:, None] * np.cos(2 * phis) - half_diff * np.sin(2 * phis)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(total > 0, score ** 2 / total, 0.0)
        if policy.conditional:
            cv = conditional_cv_array(np.maximum(moment_sq, total - moment_sq))
        else:
            cv = chi2_critical_value(1, policy.alpha)
        return np.any(inside & (values > cv), axis=1)

    def rejections(self, policy: CriticalValuePolicy = FIXED_POLICY) -> Dict[str, float]:
        """rejection frequency per statistic, DRLM at the policy, the others at their chi2 or CLR critical values"""
        out = {
            "drlm": float(np.mean(self.drlm > self.drlm_critical_values(policy))),
            "klm": float(np.mean(self.klm > chi2_critical_value(self.m, policy.alpha))),
            "ar": float(np.mean(self.ar > chi2_critical_value(self.N, policy.alpha))),
            "j": float(np.mean(self.j > chi2_critical_value(self.N - self.m, policy.alpha))),
        }
        if self.m == 1:
            out["drlm_enhanced"] = float(np.mean(self.enhanced_rejections(policy)))
            out["lr"] = float(np.mean(self.lr > clr_critical_values(self.rank, self.N, policy.alpha)))
        return out


def standard_error(frequency: float, reps: int) -> float:
    return float(np.sqrt(frequency * (1.0 - frequency) / reps))


def limit_statistics(f: np.ndarray, D: np.ndarray) -> LimitSample:
    """Statistics of replications f (reps, N) and D (reps, N, m) of the whitened moment and Jacobian"""
    reps, n, m = D.shape
    fd = np.einsum("rn,rnm->rm", f, D)
    ff = np.einsum("rn,rn->r", f, f)
    dd = np.einsum("rnm,rnl->rml", D, D)
    eye = np.eye(m)[None, :, :]
    drlm = np.einsum("rm,rm->r", fd, np.linalg.solve(ff[:, None, None] * eye + dd, fd[:, :, None])[:, :, 0])
    klm = np.einsum("rm,rm->r", fd, np.linalg.solve(dd, fd[:, :, None])[:, :, 0])
    stacked = np.concatenate([f[:, :, None], D], axis=2)
    j = np.linalg.eigvalsh(np.einsum("rni,rnj->rij", stacked, stacked))[:, 0]
    rank = np.trace(dd, axis1=1, axis2=2) if m == 1 else np.linalg.eigvalsh(dd)[:, 0]
    lr = None
    cross = None
    if m == 1:
        cross = fd[:, 0]
        lr = 0.5 * (ff - rank + np.sqrt(np.maximum((ff + rank) ** 2 - 4.0 * (ff - klm) * rank, 0.0)))
    return LimitSample(n, m, ff, klm, drlm, rank, np.maximum(j, 0.0), lr, cross)


def _concat(samples: Sequence[LimitSample]) -> LimitSample:
    first = samples[0]

    def join(name):
        parts = [getattr(s, name) for s in samples]
        return None if parts[0] is None else np.concatenate(parts)

    return LimitSample(
        first.N, first.m, join("ar"), join("klm"), join("drlm"), join("rank"), join("j"), join("lr"), join("cross")
    )


def sample_limit_drlm(
    params: LimitExperimentParams,
    reps: int,
    seed: int,
    policy: CriticalValuePolicy = FIXED_POLICY,
    *,
    key: Tuple[int, ...] = (),
) -> Tuple[float, LimitSample]:
    """Simulate the limit experiment

    Replications are drawn in blocks of BLOCK_SIZE, block i from the stream (seed, *key, i).

    :return: (DRLM rejection frequency at the policy, statistic streams)
    """
    assert reps >= 1, f"reps has to be positive, got {reps}"
    mean_f, mean_d = _limit_means(params)
    samples = []
    for block, start in enumerate(range(0, reps, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, reps - start)
        psi_f, psi_theta = draw_limit_components(replication_rng(seed, *key, block), size, params.N, params.m)
        samples.append(limit_statistics(mean_f + psi_f, mean_d + psi_theta))
    sample = _concat(samples)
    return float(np.mean(sample.drlm > sample.drlm_critical_values(policy))), sample


def _wrap_half_turn(phi: np.ndarray) -> np.ndarray:
    """angles modulo pi into (-pi/2, pi/2]"""
    return np.pi / 2 - np.mod(np.pi / 2 - phi, np.pi)


def limit_stationary_angles_from_moments(a, b, d) -> Tuple[np.ndarray, np.ndarray]:
    """(CUE angle, the two DRLM maximizer angles) from a = |f|^2, b = f'D, d = |D|^2, one parameter"""
    a, b, d = np.atleast_1d(a), np.atleast_1d(b), np.atleast_1d(d)
    phi0 = 0.5 * np.arctan2(b, 0.5 * (a - d))
    phi_cue = _wrap_half_turn(phi0 + np.pi / 2)
    maximizers = np.column_stack([_wrap_half_turn(phi0 + np.pi / 4), _wrap_half_turn(phi0 - np.pi / 4)])
    return phi_cue, maximizers


def limit_stationary_angles(f: np.ndarray, D: np.ndarray) -> Tuple[float, Tuple[float, float]]:
    """Rotation angles of the CUE and of the two DRLM maximizers for a single draw (f, D), m = 1

    The tested value sits at angle 0. The rotated pair is f(phi) = f cos(phi) + D sin(phi), D(phi) = D cos(phi) -
    f sin(phi). lambda maps to phi = atan(lambda / sqrt(Q)) around the tested value.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    D = np.asarray(D, dtype=float).reshape(-1)
    phi_cue, maximizers = limit_stationary_angles_from_moments(f @ f, f @ D, D @ D)
    return float(phi_cue[0]), (float(maximizers[0, 0]), float(maximizers[0, 1]))


def limit_j_statistic(f: np.ndarray, D: np.ndarray) -> float:
    """smallest eigenvalue of [f : D]'[f : D]"""
    D = np.asarray(D, dtype=float)
    if D.ndim == 1:
        D = D[:, None]
    stacked = np.column_stack([np.asarray(f, dtype=float).reshape(-1), D])
    return float(max(np.linalg.eigvalsh(stacked.T @ stacked)[0], 0.0))


# ---------------------------------------------------------------------------------------------------------------------
# Structural decomposition of a linear factor model


@dataclass(frozen=True, eq=False)
class StructuralDecomposition:
    """Singular value decomposition of Omega^-1/2 (mu_R : beta) diag(1, Q^1/2), scaled by sqrt(T_scale)

    The matrix is rebuilt as -Omega^-1/2 D*(lambda* : I) diag(1, Q^1/2) + Omega^1/2 D_perp delta perp_row.
    lambda_star holds infinities when the identifying block of the right singular vectors is singular.
    """

    D_star: np.ndarray
    lambda_star: np.ndarray
    delta: np.ndarray
    D_perp: np.ndarray
    perp_row: np.ndarray
    singular_values: np.ndarray
    degenerate: bool = False

    @property
    def misspecification(self) -> float:
        return float(self.delta @ self.delta)


def _first_entry_positive(U: np.ndarray) -> np.ndarray:
    signs = np.ones(U.shape[1])
    for j in range(U.shape[1]):
        nonzero = np.flatnonzero(np.abs(U[:, j]) > 1e-14)
        if nonzero.size and U[nonzero[0], j] < 0:
            signs[j] = -1.0
    return signs


def structural_matrix(mu_R, beta, Omega, Q_FF, T_scale: float = 1.0) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    Q_FF = np.atleast_2d(np.asarray(Q_FF, dtype=float))
    stacked = np.sqrt(T_scale) * np.column_stack([mu_R, beta])
    return linalg.inverse_sqrt(Omega, "Omega") @ stacked @ scipy.linalg.block_diag(np.eye(1), linalg.sqrt(Q_FF, "Q_FF"))


def svd_structural(mu_R, beta, Omega, Q_FF, T_scale: float = 1.0) -> StructuralDecomposition:
    """Structural parameters (D*, lambda*, delta, D_perp) of a linear factor model

    D* = -Omega^1/2 U1 S1 V21' Q^-1/2, lambda* = Q^1/2 V21'^-1 V11', D_perp = Omega^-1/2 U2 and delta carries the
    smallest singular value. The left singular vectors have their first nonzero entry positive.
    """
    Q_FF = np.atleast_2d(np.asarray(Q_FF, dtype=float))
    m = Q_FF.shape[0]
    A = structural_matrix(mu_R, beta, Omega, Q_FF, T_scale)
    n = A.shape[0]
    assert n > m, f"need more assets than factors, got N={n}, m={m}"
    U, s, Vt = scipy.linalg.svd(A, full_matrices=True)
    signs = _first_entry_positive(U)
    U = U * signs
    Vt[: s.shape[0]] *= signs[: s.shape[0], None]
    V = Vt.T

    degenerate = bool(s[m - 1] - s[m] < DEGENERATE_GAP * max(s[0], 1e-300))
    if degenerate:
        logger.warning("smallest singular values coincide (%.6g, %.6g): decomposition is not unique", s[m - 1], s[m])
    U1, U2 = U[:, :m], U[:, m:]
    V11, V21 = V[0, :m], V[1:, :m]
    V12 = V[0, m]
    Q_half = linalg.sqrt(Q_FF, "Q_FF")
    Omega_half = linalg.sqrt(Omega, "Omega")
    D_star = -Omega_half @ U1 @ np.diag(s[:m]) @ V21.T @ linalg.inverse(Q_half, "Q_FF^1/2")
    if abs(np.linalg.det(V21)) < 1e-12:
        direction = np.diag(V21)
        lambda_star = np.copysign(np.inf, V11 * np.where(direction < 0, -1.0, 1.0))
    else:
        lambda_star = Q_half @ np.linalg.solve(V21.T, V11)
    sign = 1.0 if V12 >= 0 else -1.0
    delta = np.zeros(n - m)
    delta[0] = s[m] * sign
    D_perp = linalg.inverse_sqrt(Omega, "Omega") @ U2
    return StructuralDecomposition(D_star, lambda_star, delta, D_perp, sign * V[:, m], s, degenerate)


def reconstruct(decomposition: StructuralDecomposition, Omega, Q_FF) -> np.ndarray:
    """Omega^-1/2 (mu_R : beta) diag(1, Q^1/2) scaled by sqrt(T_scale), from the structural parameters"""
    Q_FF = np.atleast_2d(np.asarray(Q_FF, dtype=float))
    m = Q_FF.shape[0]
    Omega_inv_half = linalg.inverse_sqrt(Omega, "Omega")
    lam = np.vstack([decomposition.lambda_star[None, :], np.eye(m)]).T
    identified = -Omega_inv_half @ decomposition.D_star @ lam @ scipy.linalg.block_diag(
        np.eye(1), linalg.sqrt(Q_FF, "Q_FF")
    )
    perp = np.outer(decomposition.delta, decomposition.perp_row)
    misspecified = linalg.sqrt(Omega, "Omega") @ decomposition.D_perp @ perp
    return identified + misspecified


# ---------------------------------------------------------------------------------------------------------------------
# Maximal invariant


class MaximalInvariant(NamedTuple):
    S_perp_perp: float
    S_l1_perp: float
    S_l1_l1: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.S_perp_perp, self.S_l1_perp], [self.S_l1_perp, self.S_l1_l1]])


def maximal_invariant(evaluation: MomentEvaluation) -> MaximalInvariant:
    """(S_perp_perp, S_l1_perp, S_l1_l1) at the tested value of a one parameter model

    S_perp_perp is the AR statistic, S_l1_l1 the identification statistic and S_l1_perp the whitened score.
    """
    assert evaluation.m == 1, "maximal invariant is defined for one parameter"
    whitened_f = linalg.inverse_sqrt(evaluation.V_ff, "V_ff") @ evaluation.f_T
    whitened_d = linalg.inverse_sqrt(evaluation.V_theta_theta_f, "V_theta_theta.f") @ evaluation.D_hat[:, 0]
    T = evaluation.T
    return MaximalInvariant(
        float(T * whitened_f @ whitened_f), float(T * whitened_f @ whitened_d), float(T * whitened_d @ whitened_d)
    )


def noncentrality(
    lambda1: float,
    lambda_star: float,
    D_star: np.ndarray,
    delta: np.ndarray,
    Q_FF: float = 1.0,
    Omega: Optional[np.ndarray] = None,
) -> np.ndarray:
    """2 x 2 noncentrality of the maximal invariant, ordered (perp, lambda1)

    a a' D*' Omega^-1 D* + b b' delta'delta / (1 + lambda*^2 / Q), with
        a = ((lambda1 - lambda*) / sqrt(1 + lambda1^2 / Q), (Q + lambda* lambda1) / sqrt(Q + lambda1^2))
        b = ((1 + lambda* lambda1 / Q) / sqrt(1 + lambda1^2 / Q), (lambda* - lambda1) / sqrt(Q + lambda1^2))
    The off diagonal sign matches S_l1_perp of maximal_invariant (D_hat = q_T - ...).
    """
    Q = float(np.asarray(Q_FF).reshape(-1)[0])
    D_star = np.asarray(D_star, dtype=float).reshape(-1)
    delta = np.asarray(delta, dtype=float).reshape(-1)
    Omega_inv = np.eye(D_star.shape[0]) if Omega is None else linalg.inverse(Omega, "Omega")
    identification = float(D_star @ Omega_inv @ D_star)
    misspecification = float(delta @ delta)
    if not np.isfinite(lambda_star):
        raise UnsupportedError("noncentrality needs a finite pseudo-true value")
    r1 = np.sqrt(1.0 + lambda1 ** 2 / Q)
    r2 = np.sqrt(Q + lambda1 ** 2)
    a = np.array([(lambda1 - lambda_star) / r1, (Q + lambda_star * lambda1) / r2])
    b = np.array([(1.0 + lambda_star * lambda1 / Q) / r1, (lambda_star - lambda1) / r2])
    return np.outer(a, a) * identification + np.outer(b, b) * misspecification / (1.0 + lambda_star ** 2 / Q)


def simulate_maximal_invariant(
    mu_R: np.ndarray,
    beta: np.ndarray,
    Omega: np.ndarray,
    Q_FF: float,
    lambda1: float,
    T: int,
    reps: int,
    seed: int,
) -> np.ndarray:
    """Draws of the maximal invariant at lambda1 in the known covariance normal model of a one factor model

    R_bar ~ N(mu_R, Omega / T) and beta_hat ~ N(beta, Omega / (T Q)) independently. The mean of the draws is
    N I_2 + noncentrality(lambda1, ...) with the structural parameters of svd_structural(..., T_scale=T).

    :return: (reps, 2, 2) array ordered (perp, lambda1)
    """
    mu_R = np.asarray(mu_R, dtype=float).reshape(-1)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    Q = float(np.asarray(Q_FF).reshape(-1)[0])
    n = mu_R.shape[0]
    rng = replication_rng(seed, 0)
    chol = np.linalg.cholesky(Omega)
    R_bar = mu_R + rng.standard_normal((reps, n)) @ chol.T / np.sqrt(T)
    beta_hat = beta + rng.standard_normal((reps, n)) @ chol.T / np.sqrt(T * Q)

    v = 1.0 + lambda1 ** 2 / Q
    f = R_bar - beta_hat * lambda1
    D = -beta_hat - (lambda1 / (Q * v)) * f
    Omega_inv_half = linalg.inverse_sqrt(Omega, "Omega")
    whitened_f = np.sqrt(T / v) * f @ Omega_inv_half
    whitened_d = np.sqrt(T * (Q + lambda1 ** 2)) * D @ Omega_inv_half
    stacked = np.stack([whitened_f, whitened_d], axis=2)
    return np.einsum("rni,rnj->rij", stacked, stacked)


class PiecewiseLinearCv(NamedTuple):
    """Critical value function interpolated on a grid of conditioning values, constant beyond the grid"""

    r_grid: np.ndarray
    values: np.ndarray

    def __call__(self, r) -> np.ndarray:
        return np.interp(r, self.r_grid, self.values)


def recalibrate_conditional_cv(
    r_grid: Sequence[float],
    N: int,
    reps: int,
    seed: int,
    *,
    alpha: float = 0.05,
    splits: int = 5,
) -> PiecewiseLinearCv:
    """Re-simulate the (1 - alpha) DRLM quantile for one parameter along a grid of r = |mu_bar|^2 + |D_bar|^2

    For each r the quantile is taken under `splits` ways of dividing r between misspecification and identification
    and the largest one is kept.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    assert r_grid.ndim == 1 and r_grid.size >= 2, "need at least two grid points"
    assert np.all(np.diff(r_grid) > 0) and r_grid[0] >= 0, "r grid has to be non negative and strictly increasing"
    values = np.empty(r_grid.shape[0])
    for i, r in enumerate(r_grid):
        quantiles = []
        for j, share in enumerate(np.linspace(0.0, 1.0, splits)):
            params = LimitExperimentParams.from_lengths(N, share * r, (1.0 - share) * r)
            _, sample = sample_limit_drlm(params, reps, seed, key=(i, j))
            quantiles.append(np.quantile(sample.drlm, 1.0 - alpha))
        values[i] = max(quantiles)
        logger.debug("recalibrated critical value %.4f at r=%.4g", values[i], r)
    return PiecewiseLinearCv(r_grid, values)
