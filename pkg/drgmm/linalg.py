# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Symmetric matrix helpers.

Every inverse and square root in drgmm goes through a symmetric eigendecomposition, so that a near singular
covariance matrix is reported with its spectrum instead of failing deep inside a Cholesky factorization.
"""

from typing import Tuple

import numpy as np
import scipy.linalg

from drgmm.errors import SingularCovarianceError

SINGULAR_TOLERANCE = 1e-12
RIDGE_FACTOR = 1e-10


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def checked_eigh(
    a: np.ndarray,
    name: str,
    *,
    tolerance: float = SINGULAR_TOLERANCE,
    ridge: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix that is required to be positive definite

    The matrix is declared singular when its smallest eigenvalue is below tolerance * trace / dim. With ridge set,
    RIDGE_FACTOR * trace / dim is added to the diagonal instead of failing (exploratory use only).

    :param a: symmetric matrix
    :param name: name used in the error message
    :param tolerance: relative singularity threshold
    :param ridge: regularize instead of raising
    :return: (eigenvalues, eigenvectors)
    :exception SingularCovarianceError: when the spectrum falls below the threshold and ridge is not set
    """
    a = symmetrize(np.atleast_2d(np.asarray(a, dtype=float)))
    dim = a.shape[0]
    scale = np.trace(a) / dim
    if ridge and scale > 0:
        a = a + RIDGE_FACTOR * scale * np.eye(dim)
    w, v = scipy.linalg.eigh(a)
    threshold = tolerance * scale
    if not np.isfinite(scale) or scale <= 0 or w[0] < threshold:
        raise SingularCovarianceError(name, float(w[0]), float(threshold))
    return w, v


def inverse(a: np.ndarray, name: str = "matrix", **kwargs) -> np.ndarray:
    w, v = checked_eigh(a, name, **kwargs)
    return (v / w) @ v.T


def sqrt(a: np.ndarray, name: str = "matrix", **kwargs) -> np.ndarray:
    w, v = checked_eigh(a, name, **kwargs)
    return (v * np.sqrt(w)) @ v.T


def inverse_sqrt(a: np.ndarray, name: str = "matrix", **kwargs) -> np.ndarray:
    w, v = checked_eigh(a, name, **kwargs)
    return (v / np.sqrt(w)) @ v.T


def is_positive_definite(a: np.ndarray) -> bool:
    try:
        checked_eigh(a, "matrix")
    except SingularCovarianceError:
        return False
    return True
