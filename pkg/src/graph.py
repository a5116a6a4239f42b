"""Implicit-graph contract, path-record search nodes and cost normalization."""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Protocol, runtime_checkable

StateKey = Hashable
ActionId = Hashable


class UnknownCostBounds(ValueError):
    """Raised when a problem cannot report its edge-cost range."""


@dataclass(frozen=True, slots=True)
class OutEdge:
    """One edge leaving a state: label, target and integer cost."""

    action: ActionId
    target: StateKey
    cost: int

    def __post_init__(self):
        if self.cost < 1:
            raise ValueError(f"Edge cost must be a positive integer, got {self.cost}")


@runtime_checkable
class SearchProblem(Protocol):
    """Implicit graph: an initial state, a goal predicate and a child generator.

    ``expand`` must be deterministic and return only the edges leaving ``state``.
    """

    initial: StateKey

    def is_goal(self, state: StateKey) -> bool: ...

    def expand(self, state: StateKey) -> list[OutEdge]: ...

    def cost_bounds(self) -> tuple[int, int] | None: ...


@dataclass(frozen=True, slots=True, eq=False)
class SearchNode:
    """A path record: last state, incoming action, parent link and g-values."""

    state: StateKey
    action: ActionId | None = None
    parent: "SearchNode | None" = None
    g_cost: int = 0
    g_size: int = 0
    seq: int = 0


@dataclass(frozen=True)
class Plan:
    actions: tuple[Any, ...] = ()
    total_cost: int = 0
    length: int = 0


@dataclass
class NodeFactory:
    """Hands out monotone generation counters for one search run."""

    _counter: itertools.count = field(default_factory=itertools.count)

    def root(self, state: StateKey) -> SearchNode:
        return SearchNode(state=state, seq=next(self._counter))

    def extend(self, node: SearchNode, edge: OutEdge) -> SearchNode:
        return extend_node(node, edge, seq=next(self._counter))


def extend_node(node: SearchNode, edge: OutEdge, seq: int = 0) -> SearchNode:
    """Extend ``node`` by one edge (n' = n a)."""
    return SearchNode(
        state=edge.target,
        action=edge.action,
        parent=node,
        g_cost=node.g_cost + edge.cost,
        g_size=node.g_size + 1,
        seq=seq,
    )


def reconstruct_plan(node: SearchNode) -> Plan:
    """Walk parent links back to the root and return the actions root-first."""
    actions = []
    current = node
    while current.parent is not None:
        actions.append(current.action)
        current = current.parent
    actions.reverse()
    return Plan(actions=tuple(actions), total_cost=node.g_cost, length=node.g_size)


def epsilon_of(problem: SearchProblem) -> Fraction:
    """Return min_edge_cost / max_edge_cost as an exact rational."""
    bounds = problem.cost_bounds()
    if bounds is None:
        raise UnknownCostBounds(f"{type(problem).__name__} does not report its cost range")
    low, high = bounds
    return normalize_cost(low, high)


def normalize_cost(cost: int, max_cost: int) -> Fraction:
    """Bring an integer cost into (0, 1] relative to ``max_cost``."""
    if max_cost <= 0:
        raise ValueError(f"max_cost must be positive, got {max_cost}")
    if not 1 <= cost <= max_cost:
        raise ValueError(f"cost {cost} outside [1, {max_cost}]")
    return Fraction(cost, max_cost)
