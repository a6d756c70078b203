# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""
Double robust inference for continuous updating GMM
"""

from drgmm.errors import (
    DrgmmError,
    InputError,
    EvaluationError,
    SingularCovarianceError,
    DegenerateTestError,
    StructureViolationError,
    ConvergenceError,
    UnsupportedError,
    DrgmmWarning,
)
from drgmm.moments import MomentModel, MomentEvaluation, evaluate
from drgmm.models import FactorData, FactorModel, IvData, IvModel, CrraModel, CrraDgpParams
from drgmm.stats import CriticalValuePolicy, TestResult, drlm, klm, gmm_ar, j_statistic, conditional_lr
from drgmm.solver import SolverConfig, cue_estimate, power_enhanced_test
from drgmm.pipeline import AnalysisGraph, AnalysisStep
from drgmm.visitor import AbstractVisitor, StepRunner


def version() -> str:
    """Retrieve used version of the drgmm library"""
    from drgmm._version import __version__

    return __version__
