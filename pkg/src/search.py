"""Best-first branch-and-bound search with anytime reporting and usefulness lookahead."""

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable

from pydantic import BaseModel, ConfigDict, Field

from src.config import settings
from src.evaluators import Evaluator, EvaluatorConfig, EvaluatorKind, Priority
from src.graph import NodeFactory, Plan, SearchNode, SearchProblem, epsilon_of, reconstruct_plan
from src.heuristics import Heuristic, ZeroHeuristic

logger = logging.getLogger(__name__)

# kinds whose g-component is cost; their lookahead plateau defaults to tau = epsilon
_COST_FAMILY = (EvaluatorKind.COST, EvaluatorKind.WEIGHTED_COST, EvaluatorKind.HYBRID)


class ConfigError(ValueError):
    """A search or run configuration that cannot be executed."""


class SearchLimits(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_expansions: int | None = Field(None, gt=0)
    max_wall_ms: int | None = Field(None, gt=0)
    max_nodes_in_memory: int | None = Field(None, gt=0)


class SearchStatus(str, Enum):
    PROVED_OPTIMAL = "PROVED_OPTIMAL"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"
    EXHAUSTED_NO_SOLUTION = "EXHAUSTED_NO_SOLUTION"


class DuplicateVerdict(str, Enum):
    FRESH = "FRESH"
    PRUNE = "PRUNE"
    REOPEN = "REOPEN"


@dataclass
class Incumbent:
    plan: Plan | None = None
    bound_cost: int | float = math.inf

    def improve(self, plan: Plan):
        if plan.total_cost >= self.bound_cost:
            raise ValueError("incumbent bound must strictly decrease")
        self.plan = plan
        self.bound_cost = plan.total_cost


@dataclass(frozen=True)
class SolutionEvent:
    cost: int
    size: int
    expansions_at_event: int
    wall_ms_at_event: int
    plan: Plan


@dataclass
class SearchStats:
    expansions: int = 0
    generations: int = 0
    duplicates_pruned: int = 0
    reopenings: int = 0
    bound_prunes: int = 0
    goal_tests: int = 0
    heuristic_calls: int = 0
    lookahead_invocations: int = 0
    dead_ends: int = 0
    discovery_expansions: int | None = None
    proof_expansions: int | None = None


@dataclass
class SearchOutcome:
    status: SearchStatus
    incumbent: Incumbent
    events: list[SolutionEvent]
    stats: SearchStats
    wall_ms: int = 0
    max_cost: int | None = None  # normalization constant in effect (HYBRID)


class OpenList:
    """Min-priority queue over (Priority, node); seq makes every key unique."""

    def __init__(self):
        self._heap: list[tuple[Priority, SearchNode]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def add(self, priority: Priority, node: SearchNode):
        heapq.heappush(self._heap, (priority, node))

    def remove(self) -> SearchNode:
        return heapq.heappop(self._heap)[1]


class ClosedMap:
    """Per-state minima of g_cost and g_size seen among expanded nodes."""

    def __init__(self):
        self._best: dict = {}

    def __len__(self) -> int:
        return len(self._best)

    def get(self, state) -> tuple[int, int] | None:
        entry = self._best.get(state)
        return tuple(entry) if entry else None

    def check(self, node: SearchNode) -> DuplicateVerdict:
        entry = self._best.get(node.state)
        if entry is None:
            self._best[node.state] = [node.g_cost, node.g_size]
            return DuplicateVerdict.FRESH
        best_cost, best_size = entry
        if node.g_cost >= best_cost and node.g_size >= best_size:
            return DuplicateVerdict.PRUNE
        entry[0] = min(best_cost, node.g_cost)
        entry[1] = min(best_size, node.g_size)
        return DuplicateVerdict.REOPEN


def bound_test(node: SearchNode, prune_value, incumbent: Incumbent) -> bool:
    """True when g_c + h_c cannot beat the incumbent (ties are pruned)."""
    if math.isinf(incumbent.bound_cost):
        return False
    return node.g_cost + prune_value >= incumbent.bound_cost


def duplicate_test(node: SearchNode, closed: ClosedMap) -> DuplicateVerdict:
    return closed.check(node)


def plateau_detect(
    node: SearchNode,
    evaluator: Evaluator,
    tau: Fraction | None = None,
    max_cost: int | None = None,
) -> bool:
    """A node sits on a plateau when its g barely moved relative to its parent.

    Without ``tau`` the evaluator's own g-component must be unchanged. With ``tau`` the
    cost component is measured and increments up to tau * max_cost count as flat.
    """
    parent = node.parent
    if parent is None:
        return False
    if tau is None:
        return evaluator.g_component(node) == evaluator.g_component(parent)
    return node.g_cost - parent.g_cost <= tau * max_cost


@dataclass
class LookaheadResult:
    children: list[SearchNode]
    usefulness: list[int | float]
    chosen: int | None  # index into children

    @property
    def chosen_child(self) -> SearchNode | None:
        return None if self.chosen is None else self.children[self.chosen]


def useful_lookahead(
    node: SearchNode,
    problem: SearchProblem,
    heuristic: Heuristic,
    h_without: Callable[[object], Heuristic],
    factory: NodeFactory,
) -> LookaheadResult:
    """Score each applicable operator by how much the estimate at the node grows without it,
    less the estimate at its child, and pick the most useful.

    An operator whose removal leaves the goal unreachable scores +inf. A child that is
    itself a dead end scores -inf. Ties keep the earliest child.

    Scores always read the cost component of the estimate, also when the run orders its
    open list by the size component.
    """
    edges = problem.expand(node.state)
    children = [factory.extend(node, edge) for edge in edges]
    usefulness: list[int | float] = []
    for edge, child in zip(edges, children):
        after = heuristic.estimate(child.state).cost
        if math.isinf(after):
            usefulness.append(-math.inf)
            continue
        before = h_without(edge.action).estimate(node.state).cost
        usefulness.append(math.inf if math.isinf(before) else before - after)

    chosen = None
    for index, score in enumerate(usefulness):
        if score > 0 and (chosen is None or score > usefulness[chosen]):
            chosen = index
    return LookaheadResult(children=children, usefulness=usefulness, chosen=chosen)


class BestFirstSearch:
    """One run of best-first branch and bound.

    The loop order is fixed: dequeue, bound test, goal test, duplicate test, expand,
    evaluate children, enqueue. The search continues after each solution and uses the
    incumbent cost to prune until the open list empties or a limit is hit.
    """

    def __init__(
        self,
        problem: SearchProblem,
        evaluator: EvaluatorConfig,
        heuristic: Heuristic,
        prune_heuristic: Heuristic | None = None,
        limits: SearchLimits | None = None,
        lookahead: bool = False,
        plateau_tau: Fraction | None = None,
        listener: Callable[[SolutionEvent], None] | None = None,
        record_wall_clock: bool | None = None,
    ):
        self.problem = problem
        self.evaluator = Evaluator.bind(evaluator, problem)
        self.heuristic = heuristic
        self.prune_heuristic = prune_heuristic or ZeroHeuristic()
        self.limits = limits or SearchLimits()
        self.lookahead = lookahead
        self.listener = listener
        self.record_wall_clock = settings.record_wall_clock if record_wall_clock is None else record_wall_clock

        if not self.prune_heuristic.admissible:
            raise ConfigError(f"{type(self.prune_heuristic).__name__} is not admissible and cannot prune")
        if lookahead and not heuristic.supports_without:
            raise ConfigError(f"lookahead needs an operator-excluding heuristic, got {type(heuristic).__name__}")

        bounds = problem.cost_bounds()
        self.max_edge_cost = bounds[1] if bounds else None
        self.plateau_tau = plateau_tau
        if lookahead and plateau_tau is None and bounds and evaluator.kind in _COST_FAMILY:
            self.plateau_tau = epsilon_of(problem)
        if self.plateau_tau is not None and self.max_edge_cost is None:
            raise ConfigError("plateau_tau needs a problem with known cost bounds")

        self.factory = NodeFactory()
        self.open = OpenList()
        self.closed = ClosedMap()
        self.incumbent = Incumbent()
        self.events: list[SolutionEvent] = []
        self.stats = SearchStats()
        self._without: dict = {}
        self._started = 0.0

    # Clock

    def _elapsed_ms(self) -> int:
        return int((time.perf_counter() - self._started) * 1000)

    def _event_ms(self) -> int:
        return self._elapsed_ms() if self.record_wall_clock else 0

    # Pseudocode steps

    def bound_test(self, node: SearchNode) -> bool:
        prune_value = self.prune_heuristic.estimate(node.state).cost
        if bound_test(node, prune_value, self.incumbent):
            self.stats.bound_prunes += 1
            return True
        return False

    def goal_test(self, node: SearchNode) -> bool:
        self.stats.goal_tests += 1
        if not self.problem.is_goal(node.state) or node.g_cost >= self.incumbent.bound_cost:
            return False
        plan = reconstruct_plan(node)
        self.incumbent.improve(plan)
        event = SolutionEvent(
            cost=plan.total_cost,
            size=plan.length,
            expansions_at_event=self.stats.expansions,
            wall_ms_at_event=self._event_ms(),
            plan=plan,
        )
        self.events.append(event)
        logger.info(
            f"New incumbent: cost={event.cost} size={event.size} after {event.expansions_at_event} expansions"
        )
        if self.listener is not None:
            self.listener(event)
        return True

    def duplicate_test(self, node: SearchNode) -> DuplicateVerdict:
        verdict = duplicate_test(node, self.closed)
        if verdict is DuplicateVerdict.PRUNE:
            self.stats.duplicates_pruned += 1
        elif verdict is DuplicateVerdict.REOPEN:
            self.stats.reopenings += 1
        return verdict

    def _enqueue(self, node: SearchNode):
        self.stats.generations += 1
        value = self.heuristic.estimate(node.state)
        priority = self.evaluator.priority(node, value)
        if priority.pruned:
            self.stats.dead_ends += 1
            return
        self.open.add(priority, node)

    def _expand(self, node: SearchNode):
        self.stats.expansions += 1
        for edge in self.problem.expand(node.state):
            self._enqueue(self.factory.extend(node, edge))

    def _h_without(self, action) -> Heuristic:
        excluded = self._without.get(action)
        if excluded is None:
            excluded = self.heuristic.without(action)
            self._without[action] = excluded
        return excluded

    def _expand_with_lookahead(self, node: SearchNode):
        self.stats.expansions += 1
        self.stats.lookahead_invocations += 1
        result = useful_lookahead(node, self.problem, self.heuristic, self._h_without, self.factory)
        for child in result.children:
            self._enqueue(child)
        chosen = result.chosen_child
        if chosen is None:
            logger.debug(f"Lookahead at seq {node.seq}: no useful operator")
            return
        if self._limit_reached():
            return
        logger.debug(f"Lookahead at seq {node.seq}: expanding seq {chosen.seq} (usefulness {result.usefulness[result.chosen]})")
        self._process(chosen, allow_lookahead=False)

    def _process(self, node: SearchNode, allow_lookahead: bool = True):
        if self.bound_test(node):
            return
        if self.goal_test(node):
            return
        if self.duplicate_test(node) is DuplicateVerdict.PRUNE:
            return
        if (
            allow_lookahead
            and self.lookahead
            and plateau_detect(node, self.evaluator, self.plateau_tau, self.max_edge_cost)
        ):
            self._expand_with_lookahead(node)
        else:
            self._expand(node)

    def _limit_reached(self) -> bool:
        limits = self.limits
        if limits.max_expansions is not None and self.stats.expansions >= limits.max_expansions:
            return True
        if limits.max_wall_ms is not None and self._elapsed_ms() >= limits.max_wall_ms:
            return True
        if limits.max_nodes_in_memory is not None and len(self.open) + len(self.closed) > limits.max_nodes_in_memory:
            return True
        return False

    def run(self) -> SearchOutcome:
        self._started = time.perf_counter()
        logger.info(
            f"Search start: eval={self.evaluator.config.kind.value} "
            f"tiebreak={self.evaluator.config.tiebreak.value} lookahead={self.lookahead}"
        )
        self._enqueue(self.factory.root(self.problem.initial))

        status = None
        while self.open:
            if self._limit_reached():
                status = SearchStatus.BUDGET_EXHAUSTED
                logger.warning(f"Search budget exhausted after {self.stats.expansions} expansions")
                break
            self._process(self.open.remove())

        if status is None:
            if self.incumbent.plan is not None:
                status = SearchStatus.PROVED_OPTIMAL
                self.stats.proof_expansions = self.stats.expansions
            else:
                status = SearchStatus.EXHAUSTED_NO_SOLUTION

        if self.events:
            self.stats.discovery_expansions = self.events[-1].expansions_at_event
        self.stats.heuristic_calls = self.heuristic.calls + sum(h.calls for h in self._without.values())

        wall_ms = self._event_ms()
        logger.info(
            f"Search done: status={status.value} best={self.incumbent.bound_cost} "
            f"expansions={self.stats.expansions} generations={self.stats.generations}"
        )
        return SearchOutcome(
            status=status,
            incumbent=self.incumbent,
            events=self.events,
            stats=self.stats,
            wall_ms=wall_ms,
            max_cost=self.evaluator.max_cost,
        )


def best_first_bnb(
    problem: SearchProblem,
    evaluator: EvaluatorConfig,
    heuristic: Heuristic,
    prune_heuristic: Heuristic | None = None,
    limits: SearchLimits | None = None,
    lookahead: bool = False,
    plateau_tau: Fraction | None = None,
    listener: Callable[[SolutionEvent], None] | None = None,
    record_wall_clock: bool | None = None,
) -> SearchOutcome:
    return BestFirstSearch(
        problem,
        evaluator,
        heuristic,
        prune_heuristic=prune_heuristic,
        limits=limits,
        lookahead=lookahead,
        plateau_tau=plateau_tau,
        listener=listener,
        record_wall_clock=record_wall_clock,
    ).run()


def run_deterministically(
    problem: SearchProblem,
    evaluator: EvaluatorConfig,
    heuristic_factory: Callable[[], Heuristic],
    prune_factory: Callable[[], Heuristic] = ZeroHeuristic,
    limits: SearchLimits | None = None,
    lookahead: bool = False,
    plateau_tau: Fraction | None = None,
) -> SearchOutcome:
    """Run with fresh heuristic instances and the wall clock zeroed.

    Expansion limits keep their meaning; a wall-clock limit would make the run
    machine-dependent and is rejected.
    """
    if limits is not None and limits.max_wall_ms is not None:
        raise ConfigError("deterministic runs cannot use a wall-clock limit")
    return best_first_bnb(
        problem,
        evaluator,
        heuristic_factory(),
        prune_heuristic=prune_factory(),
        limits=limits,
        lookahead=lookahead,
        plateau_tau=plateau_tau,
        record_wall_clock=False,
    )
