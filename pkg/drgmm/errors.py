# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Error and warning types raised by drgmm.

Contract violations (wrong dimensions, unsupported configuration) are asserted where they happen. The classes below
are for failures that depend on the data: a user can hit them with a well formed call, and the command line maps each
of them to a dedicated exit code.
"""

from typing import Optional


class DrgmmError(Exception):
    """Base class of every domain error of the library"""

    exit_code: int = 1


class InputError(DrgmmError):
    """Malformed dataset or configuration file"""

    exit_code = 2

    def __init__(
        self, message: str, *, row: Optional[int] = None, column: Optional[str] = None
    ):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column


class EvaluationError(DrgmmError):
    """Moment function produced a non-finite value"""

    exit_code = 3

    def __init__(self, message: str, *, observation: Optional[int] = None):
        suffix = f" at observation {observation}" if observation is not None else ""
        super().__init__(f"{message}{suffix}")
        self.observation = observation


class SingularCovarianceError(DrgmmError):
    """Covariance matrix spectrum falls below the singularity threshold"""

    exit_code = 3

    def __init__(self, name: str, smallest_eigenvalue: float, threshold: float):
        super().__init__(
            f"{name} is singular: smallest eigenvalue {smallest_eigenvalue:.3e} "
            f"below threshold {threshold:.3e}"
        )
        self.smallest_eigenvalue = smallest_eigenvalue
        self.threshold = threshold


class DegenerateTestError(DrgmmError):
    """Weight matrix of a score statistic cannot be inverted"""

    exit_code = 3

    def __init__(self, statistic: str, f_norm: float, d_norm: float):
        super().__init__(
            f"{statistic} weight matrix is singular (|f_T| = {f_norm:.3e}, |D_hat| = {d_norm:.3e})"
        )
        self.f_norm = f_norm
        self.d_norm = d_norm


class StructureViolationError(DrgmmError):
    """Model does not have the linear/Kronecker structure an operation relies on"""

    exit_code = 3


class ConvergenceError(DrgmmError):
    """Optimizer or search did not converge"""

    exit_code = 4


class UnsupportedError(DrgmmError):
    """Requested combination is not supported (e.g. conditional critical values for m > 1)"""

    exit_code = 2


class DrgmmWarning(UserWarning):
    """Warning category for recoverable numerical situations"""
