# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

from typing import Optional, Sequence

import numpy as np
import pandas as pd
import pytest

from drgmm.models import FactorData, IvData, factor_model, iv_model, crra_dgp_sample, load_crra_calibration
from drgmm.moments import MomentModel, MomentEvaluation, as_theta
from drgmm.pipeline import AnalysisStep
from drgmm.solver import SolverConfig


class SeriesModel(MomentModel):
    """f_t(theta) = a_t + b_t theta with q_t = b_t, covariances by Eicker-White"""

    name = "series"
    is_linear = True

    def __init__(self, a: np.ndarray, b: np.ndarray):
        super().__init__(T=a.shape[0], k_f=a.shape[1], m=b.shape[2])
        self.a = a
        self.b = b

    def moment_series(self, theta: np.ndarray) -> np.ndarray:
        return self.a + self.b @ as_theta(self, theta)

    def derivative_series(self, theta: np.ndarray) -> np.ndarray:
        return self.b


def random_series_model(seed: int, T: int = 80, k: int = 4, m: int = 1) -> SeriesModel:
    rng = np.random.default_rng(seed)
    b_mean = rng.uniform(0.5, 1.5, (k, m))
    a = 0.3 + rng.standard_normal((T, k))
    b = b_mean + 0.3 * rng.standard_normal((T, k, m)) + 0.2 * a[:, :, None]
    return SeriesModel(a, b)


def make_factor_data(
    seed: int,
    *,
    T: int = 240,
    N: int = 8,
    m: int = 1,
    premia: Optional[Sequence[float]] = None,
    misspecification: float = 0.0,
    beta_scale: float = 1.0,
) -> FactorData:
    """excess returns R_t = beta lambda + e + beta (F_t - mean F) + eps_t, e the pricing errors"""
    rng = np.random.default_rng(seed)
    premia = np.full(m, 0.5) if premia is None else np.asarray(premia, dtype=float)
    beta = beta_scale * rng.uniform(0.5, 1.5, (N, m))
    if m > 1:
        beta[:, 1:] += rng.standard_normal((N, m - 1))
    F = rng.standard_normal((T, m))
    pricing_errors = misspecification * rng.standard_normal(N)
    eps = 0.5 * rng.standard_normal((T, N))
    R = beta @ premia + pricing_errors + (F - F.mean(axis=0)) @ beta.T + eps
    return FactorData(R, F, excess=True)


def raw_returns(data: FactorData, seed: int = 99) -> np.ndarray:
    """T x (N+1) raw returns whose excess over the last column is data.R"""
    base = 1.0 + np.random.default_rng(seed).standard_normal(data.T)
    return np.column_stack([data.R + base[:, None], base])


def make_iv_data(
    seed: int, *, T: int = 400, k: int = 4, theta: float = 1.0, strength: float = 0.5, controls: int = 0
) -> IvData:
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((T, k))
    errors = rng.multivariate_normal([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]], T)
    W = rng.standard_normal((T, controls)) if controls else None
    shift = W.sum(axis=1) if controls else 0.0
    X = Z @ np.full(k, strength) + errors[:, 1] + shift
    y = theta * X + errors[:, 0] + 0.5 * shift
    return IvData(y, X, Z, W)


def manual_evaluation(f_T, V_ff, *, q_T=None, D_hat=None, T: int = 100) -> MomentEvaluation:
    """evaluation with zero covariance between the derivative and the moments"""
    f_T = np.asarray(f_T, dtype=float)
    k = f_T.shape[0]
    q_T = np.ones((k, 1)) if q_T is None else np.asarray(q_T, dtype=float)
    m = q_T.shape[1]
    V_ff = np.asarray(V_ff, dtype=float)
    return MomentEvaluation(
        theta=np.zeros(m),
        f_T=f_T,
        q_T=q_T,
        V_ff=V_ff,
        V_theta_f=np.zeros((m, k, k)),
        V_theta_theta=np.eye(k * m),
        V_theta_theta_f=np.eye(k * m),
        D_hat=q_T if D_hat is None else np.asarray(D_hat, dtype=float),
        T=T,
        V_ff_inv=np.linalg.inv(V_ff),
    )


@pytest.fixture(scope="session")
def series_model_class():
    return SeriesModel


@pytest.fixture(scope="function")
def series_model():
    return random_series_model(3)


@pytest.fixture(scope="session")
def factor_data():
    return make_factor_data(11)


@pytest.fixture(scope="session")
def factor_iid(factor_data):
    return factor_model(factor_data)


@pytest.fixture(scope="session")
def misspecified_factor():
    return factor_model(make_factor_data(12, misspecification=0.3, beta_scale=0.3))


@pytest.fixture(scope="session")
def two_factor():
    return factor_model(make_factor_data(13, m=2, premia=[0.5, -0.3]))


@pytest.fixture(scope="session")
def iv_data():
    return make_iv_data(21)


@pytest.fixture(scope="session")
def iv_iid(iv_data):
    return iv_model(iv_data)


@pytest.fixture(scope="session")
def crra_calibration():
    return load_crra_calibration()


@pytest.fixture(scope="session")
def crra_params(crra_calibration):
    return crra_calibration[0]


@pytest.fixture(scope="session")
def crra_sample(crra_params):
    return crra_dgp_sample(crra_params, 400, 3)


@pytest.fixture(scope="session")
def small_config():
    return SolverConfig(grid_size=401, grid_size_2d=41)


def write_factor_csv(path, data: FactorData) -> str:
    """raw returns with a leading date column, N+1 return columns then the factors"""
    R = raw_returns(data)
    frame = pd.DataFrame(R, columns=[f"R_{i + 1}" for i in range(R.shape[1])])
    frame.insert(0, "date", pd.date_range("2000-01-31", periods=data.T, freq="M").strftime("%Y-%m-%d"))
    for j in range(data.F.shape[1]):
        frame[f"F_{j + 1}"] = data.F[:, j]
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture(scope="function")
def factor_csv(tmp_path, factor_data):
    return write_factor_csv(tmp_path / "factor.csv", factor_data)


@pytest.fixture(scope="function")
def two_factor_csv(tmp_path):
    return write_factor_csv(tmp_path / "two_factor.csv", make_factor_data(13, m=2, premia=[0.5, -0.3]))


@pytest.fixture(scope="function")
def complex_steps():
    # A -> C, D    B -> E, M    D, E -> F    E -> G
    # F -> H, I, J, K    G -> K    J, K -> L    K -> M
    return [
        AnalysisStep("A"),
        AnalysisStep("B"),
        AnalysisStep("C", parents={"A"}),
        AnalysisStep("D", parents={"A"}),
        AnalysisStep("E", parents={"B"}),
        AnalysisStep("F", parents={"D", "E"}),
        AnalysisStep("G", parents={"E"}),
        AnalysisStep("H", parents={"F"}),
        AnalysisStep("I", parents={"F"}),
        AnalysisStep("J", parents={"F"}),
        AnalysisStep("K", parents={"G", "F"}),
        AnalysisStep("L", parents={"J", "K"}),
        AnalysisStep("M", parents={"K", "B"}),
    ]
