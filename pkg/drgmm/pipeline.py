# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Analysis execution graph.

An analysis (ingest, model, CUE, statistics, report) is a DAG of steps. Each step receives the results of its parents
keyed by their id and returns its own result.
"""

from copy import copy
from typing import Any, Callable, Dict, List, Optional, Set

import networkx as nx

root_step = "::root_step::"


AnyVisitor = Any
"""Any visitor is a class that is inheriting from AbstractVisitor"""

StepAction = Callable[[Dict[str, Any]], Any]


class AnalysisStep:
    """Node of the analysis graph"""

    parents: Set[str]
    """ids of the steps whose results this step consumes"""

    optional: bool
    """a domain error in an optional step is recorded and the analysis goes on"""

    def __init__(
        self,
        uid: str = None,
        action: Optional[StepAction] = None,
        *,
        parents: Set[str] = None,
        optional: bool = False,
        graph_ref: nx.DiGraph = None,
    ):
        self.parents = set(parents or ())
        self.optional = optional
        self._action = action
        self._graph_ref = graph_ref
        self._id = uid

    # == PRIVATE ==
    _id: str = None
    _graph_ref: nx.DiGraph = None
    _depth: int = 0

    def __len__(self):
        return 1

    def apply_accept_(self, visitor: AnyVisitor) -> bool:
        """do not override. Internal accept updating the progress bar of the visitor"""
        if self.id != root_step and visitor.progress_bar_ is not None:
            visitor.progress_bar_.set_postfix({"step": self._id, "visitor": type(visitor).__name__})
            visitor.progress_bar_.update()
            visitor.progress_bar_.refresh()
        return self.accept(visitor)

    def accept(self, visitor: AnyVisitor) -> bool:
        if self.id == root_step:
            return True
        return visitor.visit_step(self)

    def run(self, inputs: Dict[str, Any]) -> Any:
        assert self._action is not None, f"step {self.id} has no action"
        return self._action(inputs)

    def get_successors(self) -> List["AnalysisStep"]:
        """Steps consuming the result of the current one"""
        if self._graph_ref is None:
            return []
        return [self._graph_ref.nodes[step_id]["content"] for step_id in self._graph_ref.successors(self._id)]

    def get_predecessors(self) -> List["AnalysisStep"]:
        """Steps the current one depends on"""
        if self._graph_ref is None:
            return []
        return [self._graph_ref.nodes[step_id]["content"] for step_id in self._graph_ref.predecessors(self._id)]

    @property
    def id(self) -> str:
        """Id of the step in the graph"""
        return self._id

    @property
    def depth(self) -> int:
        """layer of the step in the graph, steps of equal depth do not depend on each other"""
        return self._depth

    @property
    def graph_ref(self) -> nx.DiGraph:
        """Ref **internally** used by the visitors, set when the step is added"""
        return self._graph_ref


class AnalysisGraph:
    """Analysis graph main class, a reserved root step is the ancestor of every step"""

    _graph: nx.DiGraph

    def __init__(self):
        self._graph = nx.DiGraph()
        self._graph.add_node(root_step, content=AnalysisStep(uid=root_step, graph_ref=self._graph))

    def add_steps(self, steps: List[AnalysisStep]) -> None:
        """Add all the provided steps, the insertion order is inferred from the parents

        :exception assert failure in case the steps are not linked together or a step already exists
        :param steps: steps to add, their id has to be set
        """
        ordered: List[AnalysisStep] = [s for s in steps if len(s.parents) == 0]
        known = set(self._graph)

        def parents_known(s: AnalysisStep) -> bool:
            known.update({o.id for o in ordered})
            if s.id not in known:
                return s.parents.issubset(known)
            return False

        while len(ordered) < len(steps):
            to_add = [s for s in steps if parents_known(s)]
            assert len(to_add) > 0, "provided steps are not all linked together"
            ordered.extend(to_add)

        for step in ordered:
            self.add_step(step)

    def add_step(self, step: AnalysisStep) -> None:
        """Add a step in the graph

        :exception: assertion error if the id contains ':', is already in the graph or if a parent doesn't exist
        """
        assert step.id and ":" not in step.id, f"step id cannot be empty or contain a ':', got {step.id!r}"
        assert not self._graph.has_node(step.id), f"{step.id} is already in the analysis graph"
        assert all(
            self._graph.has_node(p) for p in step.parents
        ), f"all parents ({step.parents}) of {step.id} have to be added to the analysis graph first"

        step._graph_ref = self._graph
        step._depth = self._find_depth(step.parents)
        self._graph.add_node(step.id, content=step)

        if len(step.parents) == 0:
            step.parents.add(root_step)

        for parent in step.parents:
            self._graph.add_edge(parent, step.id)

    def remove_step(self, step_id: str) -> None:
        """Remove the provided step and all its successors"""
        if self._graph.has_node(step_id):
            for s in copy(list(self._graph.successors(step_id))):
                self.remove_step(s)
            self._graph.remove_node(step_id)

    @property
    def root(self) -> AnalysisStep:
        return self.get_step(root_step)

    @property
    def graph(self) -> nx.DiGraph:
        """reference on the networkx graph"""
        return self._graph

    def __len__(self):
        return self._graph.number_of_nodes() - 1

    def get_step(self, step_id: str) -> Optional[AnalysisStep]:
        """:return: the step of the given id, None if not in the graph"""
        if not self._graph.has_node(step_id):
            return None
        return self._graph.nodes[step_id]["content"]

    def _find_depth(self, parents: Set[str]) -> int:
        """largest depth of the parents plus one"""
        depths = [
            self._graph.nodes[p]["content"].depth for p in parents if self._graph.has_node(p) and p != root_step
        ]
        return max(depths, default=0) + 1
