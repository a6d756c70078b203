# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

import logging
from typing import Any, Callable, Dict, List, Optional, Tuple

import networkx as nx
from tqdm import tqdm

from drgmm.errors import DrgmmError
from drgmm.pipeline import AnalysisGraph, AnalysisStep, root_step

logger = logging.getLogger(__name__)


def _sorted_steps(graph: AnalysisGraph) -> List[AnalysisStep]:
    return [graph.graph.nodes[step_id]["content"] for step_id in nx.lexicographical_topological_sort(graph.graph)]


class AbstractVisitor:
    """Base class for visitors of an analysis graph

    Steps are visited in lexicographical topological order. A visitor implements `visit_step`, returning False
    interrupts the visitation. It should NOT override the visit method.
    """

    with_progress_bar: bool

    # List of Predicate/Hook
    __custom_hooks: List[Tuple[Callable, Callable]]

    # progress bar set
    progress_bar_: Optional[tqdm] = None

    def __init__(self, *, with_progress_bar: bool = False):
        """
        :param with_progress_bar: have a terminal tqdm progression bar while traversing the graph
        """
        self.with_progress_bar = with_progress_bar
        self.__custom_hooks = []

    def visit(self, graph: AnalysisGraph) -> bool:
        self.hook_start()

        with tqdm(
            total=len(graph),
            disable=not self.with_progress_bar,
            desc=f"Analysis {type(self).__name__:<16}",
            leave=True,
        ) as pbar:
            self.progress_bar_ = pbar
            not_interrupted = self.apply_visitation_(graph)
        self.progress_bar_ = None

        if not_interrupted:
            self.hook_end()

        return not_interrupted

    def apply_visitation_(self, graph: AnalysisGraph) -> bool:
        """do not override / directly use. Internal visitation method, use visit(graph) instead"""
        for step in _sorted_steps(graph):
            for predicate, hook in self.__custom_hooks:
                if step.id != root_step and predicate(step):
                    hook(step)

            if not step.apply_accept_(self):
                return False
        return True

    def visit_step(self, step: AnalysisStep) -> bool:
        return True

    def hook_start(self):
        """Hook to implement in order to do an action at the start of the visitation"""
        pass

    def hook_end(self):
        """Hook to implement in order to do an action at the end of the visitation"""
        pass

    def register_custom_hook(self, *, predicate: Callable, hook: Callable):
        """Register a custom hook

        The predicate is applied to each step during visitation, if it returns True the hook is called with the step.
        """
        self.__custom_hooks.append((predicate, hook))


class StepRunner(AbstractVisitor):
    """Run the action of every step with the results of its parents

    results maps step ids to their result. A domain error raised by an optional step is kept in errors and its
    successors are skipped, any other domain error propagates.
    """

    results: Dict[str, Any]
    errors: Dict[str, DrgmmError]

    def __init__(self, *, stop_after: Optional[str] = None, **kwargs):
        """
        :param stop_after: interrupt the visitation once the step of this id has run
        """
        super().__init__(**kwargs)
        self.stop_after = stop_after
        self.results = {}
        self.errors = {}

    def visit_step(self, step: AnalysisStep) -> bool:
        parents = [p for p in step.parents if p != root_step]
        if any(p in self.errors or p not in self.results for p in parents):
            logger.debug("step %s skipped, a parent did not produce a result", step.id)
            return True
        try:
            self.results[step.id] = step.run({p: self.results[p] for p in parents})
        except DrgmmError as e:
            if not step.optional:
                raise
            logger.warning("optional step %s failed: %s", step.id, e)
            self.errors[step.id] = e
        return step.id != self.stop_after


def log_steps(visitor: AbstractVisitor, level: int = logging.INFO):
    """log every visited step"""
    visitor.register_custom_hook(
        predicate=lambda step: True, hook=lambda step: logger.log(level, "running step %s", step.id)
    )
