# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import logging

import pytest

from drgmm.errors import DrgmmError, EvaluationError
from drgmm.pipeline import AnalysisGraph, AnalysisStep
from drgmm.visitor import AbstractVisitor, StepRunner, log_steps


class OrderVisitor(AbstractVisitor):
    def __init__(self, stop_at=None, **kwargs):
        super().__init__(**kwargs)
        self.order = []
        self.stop_at = stop_at
        self.started = False
        self.ended = False

    def visit_step(self, step) -> bool:
        self.order.append(step.id)
        return step.id != self.stop_at

    def hook_start(self):
        self.started = True

    def hook_end(self):
        self.ended = True


def test_lexicographical_topological_order(complex_steps):
    graph = AnalysisGraph()
    graph.add_steps(complex_steps)

    v = OrderVisitor()
    assert v.visit(graph)
    assert v.order == list("ABCDEFGHIJKLM")
    assert v.started and v.ended

    # re-use
    v.order = []
    assert v.visit(graph)
    assert v.order == list("ABCDEFGHIJKLM")


def test_interrupted_visitation(complex_steps):
    graph = AnalysisGraph()
    graph.add_steps(complex_steps)

    v = OrderVisitor(stop_at="F")
    assert not v.visit(graph)
    assert v.order == list("ABCDEF")
    assert v.started and not v.ended


def test_visit_with_progress_bar(complex_steps):
    graph = AnalysisGraph()
    graph.add_steps(complex_steps)

    v = OrderVisitor(with_progress_bar=True)
    assert v.visit(graph)
    assert len(v.order) == 13
    assert v.progress_bar_ is None


def test_custom_hook(complex_steps):
    graph = AnalysisGraph()
    graph.add_steps(complex_steps)

    hooked = []
    v = OrderVisitor()
    v.register_custom_hook(predicate=lambda step: step.depth == 4, hook=lambda step: hooked.append(step.id))
    v.visit(graph)
    assert hooked == ["H", "I", "J", "K"]


def test_log_steps(complex_steps, caplog):
    graph = AnalysisGraph()
    graph.add_steps(complex_steps)

    v = OrderVisitor()
    log_steps(v, logging.WARNING)
    with caplog.at_level(logging.WARNING, logger="drgmm.visitor"):
        v.visit(graph)
    assert sum("running step" in r.message for r in caplog.records) == 13


def _analysis(fail_optional: bool = False, fail_required: bool = False) -> AnalysisGraph:
    def fit(inputs):
        if fail_required:
            raise EvaluationError("cannot fit")
        return inputs["data"] * 2

    def diagnostics(inputs):
        if fail_optional:
            raise DrgmmError("no diagnostics")
        return inputs["fit"] + 1

    graph = AnalysisGraph()
    graph.add_steps(
        [
            AnalysisStep("data", lambda inputs: 3),
            AnalysisStep("fit", fit, parents={"data"}),
            AnalysisStep("diagnostics", diagnostics, parents={"fit"}, optional=True),
            AnalysisStep("flagged", lambda inputs: inputs["diagnostics"] > 0, parents={"diagnostics"}),
            AnalysisStep("report", lambda inputs: dict(inputs), parents={"data", "fit"}),
        ]
    )
    return graph


def test_step_runner_results():
    runner = StepRunner()
    assert runner.visit(_analysis())
    assert runner.results == {"data": 3, "fit": 6, "diagnostics": 7, "flagged": True, "report": {"data": 3, "fit": 6}}
    assert runner.errors == {}


def test_step_runner_optional_failure():
    runner = StepRunner()
    assert runner.visit(_analysis(fail_optional=True))
    assert isinstance(runner.errors["diagnostics"], DrgmmError)
    assert "diagnostics" not in runner.results
    # successors of a failed step are skipped
    assert "flagged" not in runner.results
    assert runner.results["report"] == {"data": 3, "fit": 6}


def test_step_runner_required_failure():
    with pytest.raises(EvaluationError):
        StepRunner().visit(_analysis(fail_required=True))


def test_step_runner_stop_after():
    runner = StepRunner(stop_after="fit")
    assert not runner.visit(_analysis())
    assert set(runner.results) == {"data", "fit"}
