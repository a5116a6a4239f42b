"""Heuristic estimators: zero, exact trap oracles, additive cost propagation and relaxed plans."""

import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

from src.tasks import CompiledTask, GroundedProblem, GroundedTask, compile_task

logger = logging.getLogger(__name__)

INFINITE = math.inf


class UnreachableGoal(ValueError):
    """Raised when a relaxed plan is requested for a state whose goal is unreachable."""


class HeuristicValue(NamedTuple):
    """Cost-to-go and size-to-go; both INFINITE at a dead end."""

    cost: int | float
    size: int | float

    @property
    def is_dead_end(self) -> bool:
        return math.isinf(self.cost)


ZERO = HeuristicValue(0, 0)
DEAD_END = HeuristicValue(INFINITE, INFINITE)


class HeuristicKind(str, Enum):
    ZERO = "zero"
    EXACT = "exact"
    HADD_COST = "hadd"
    RP_COST = "rp-cost"
    RP_SIZE_CHEAP = "rp-size-cheap"
    RP_SIZE_SHORT = "rp-size-short"


class Heuristic:
    """Base estimator bound to one problem, memoized per state within a run."""

    admissible = False
    supports_without = False

    def __init__(self):
        self._memo: dict = {}
        self.calls = 0

    def estimate(self, state) -> HeuristicValue:
        value = self._memo.get(state)
        if value is None:
            self.calls += 1
            value = self._compute(state)
            self._memo[state] = value
        return value

    def _compute(self, state) -> HeuristicValue:
        raise NotImplementedError

    def without(self, action) -> "Heuristic":
        raise NotImplementedError(f"{type(self).__name__} cannot exclude operators")


class ZeroHeuristic(Heuristic):
    admissible = True

    def estimate(self, state) -> HeuristicValue:
        return ZERO


def h_zero(state) -> HeuristicValue:
    return ZERO


# Exact oracles for the abstract traps


class CycleExactHeuristic(Heuristic):
    """Cheapest cost to the goal residue and the length of that path."""

    admissible = True

    def __init__(self, config):
        super().__init__()
        self.config = config

    def _compute(self, state: int) -> HeuristicValue:
        from src.domains import cycle_distance

        cost, size = cycle_distance(self.config, state, self.config.goal_residue)
        return HeuristicValue(cost, size)


def h_exact_cycle(config):
    return CycleExactHeuristic(config).estimate


class BranchingExactHeuristic(Heuristic):
    """Remaining high/low labels needed; dead end once either count overshoots."""

    admissible = True

    def __init__(self, config):
        super().__init__()
        self.config = config

    def _compute(self, state: tuple[int, ...]) -> HeuristicValue:
        cfg = self.config
        highs = sum(1 for label in state if label < cfg.x)
        lows = len(state) - highs
        missing_high = cfg.goal_high - highs
        missing_low = cfg.goal_low - lows
        if missing_high < 0 or missing_low < 0:
            return DEAD_END
        return HeuristicValue(
            missing_high * cfg.high_cost + missing_low * cfg.low_cost,
            missing_high + missing_low,
        )


# Delete relaxation


@dataclass(frozen=True)
class CostTable:
    fact_cost: tuple
    action_value: tuple  # action cost plus the summed cost of its preconditions
    best_supporter: tuple
    goal_cost: int | float


@dataclass(frozen=True)
class RelaxedPlan:
    actions: tuple[int, ...]  # extraction order
    order: tuple[int, ...]  # an executable order under delete-free semantics
    total_cost: int
    size: int


def _compiled(task) -> CompiledTask:
    return task if isinstance(task, CompiledTask) else compile_task(task)


def hadd_propagate(
    task: GroundedTask | CompiledTask,
    state: int,
    costs: Sequence[int] | None = None,
    excluded: frozenset[int] = frozenset(),
) -> CostTable:
    """Additive cost propagation over the delete relaxation from ``state`` (a fact bitmask).

    ``costs`` overrides action costs; ``excluded`` actions never fire.
    Best-supporter ties break toward the lowest action index.
    """
    compiled = _compiled(task)
    actions = compiled.actions
    action_cost = costs if costs is not None else [a.cost for a in actions]

    fact_cost = [INFINITE] * compiled.n_facts
    supporter: list[int | None] = [None] * compiled.n_facts
    action_value = [INFINITE] * len(actions)
    remaining = [len(a.pre) for a in actions]
    accumulated = [0] * len(actions)
    done = [False] * compiled.n_facts
    heap: list[tuple[int, int]] = []

    def fire(index: int):
        value = action_cost[index] + accumulated[index]
        action_value[index] = value
        for fact in actions[index].add:
            current = fact_cost[fact]
            if value < current:
                fact_cost[fact] = value
                supporter[fact] = index
                heapq.heappush(heap, (value, fact))
            elif value == current and supporter[fact] is not None and index < supporter[fact]:
                supporter[fact] = index

    fact = 0
    mask = state
    while mask:
        if mask & 1:
            fact_cost[fact] = 0
            heapq.heappush(heap, (0, fact))
        mask >>= 1
        fact += 1

    for index in compiled.no_pre:
        if index not in excluded:
            fire(index)

    while heap:
        cost, fact = heapq.heappop(heap)
        if done[fact] or cost > fact_cost[fact]:
            continue
        done[fact] = True
        for index in compiled.pre_of[fact]:
            if index in excluded:
                continue
            remaining[index] -= 1
            accumulated[index] += cost
            if remaining[index] == 0:
                fire(index)

    goal_cost = 0
    for fact in compiled.goal:
        goal_cost += fact_cost[fact]

    return CostTable(
        fact_cost=tuple(fact_cost),
        action_value=tuple(action_value),
        best_supporter=tuple(supporter),
        goal_cost=goal_cost,
    )


def extract_relaxed_plan(task: GroundedTask | CompiledTask, state: int, table: CostTable) -> RelaxedPlan:
    """Backchain from the goal through best supporters, selecting each action once."""
    compiled = _compiled(task)
    if math.isinf(table.goal_cost):
        raise UnreachableGoal("goal is unreachable under the delete relaxation")

    selected: list[int] = []
    chosen: set[int] = set()
    marked: set[int] = set()
    stack = [f for f in reversed(compiled.goal) if not state >> f & 1]
    while stack:
        fact = stack.pop()
        if fact in marked:
            continue
        marked.add(fact)
        index = table.best_supporter[fact]
        if index in chosen:
            continue
        chosen.add(index)
        selected.append(index)
        for pre in reversed(compiled.actions[index].pre):
            if not state >> pre & 1 and pre not in marked:
                stack.append(pre)

    order = tuple(sorted(selected, key=lambda i: (table.action_value[i], i)))
    return RelaxedPlan(
        actions=tuple(selected),
        order=order,
        total_cost=sum(compiled.actions[i].cost for i in selected),
        size=len(selected),
    )


def relaxed_plan_achieves_goal(task: GroundedTask | CompiledTask, state: int, plan: RelaxedPlan) -> bool:
    """Execute ``plan.order`` ignoring deletes; True iff every precondition holds and the goal is reached."""
    compiled = _compiled(task)
    reached = state
    for index in plan.order:
        action = compiled.actions[index]
        if reached & action.pre_mask != action.pre_mask:
            return False
        reached |= action.add_mask
    return reached & compiled.goal_mask == compiled.goal_mask


class RelaxedPlanHeuristic(Heuristic):
    """h_add and relaxed-plan estimators over a grounded task.

    RP_COST and RP_SIZE_CHEAP share one computation (plan cost, plan size) on true costs;
    the evaluator decides which component it reads. RP_SIZE_SHORT re-propagates with unit
    costs, so its plan is the shortest-looking one rather than the cheapest.
    """

    supports_without = True

    def __init__(self, task: GroundedTask | CompiledTask, kind: HeuristicKind, excluded: frozenset[int] = frozenset()):
        super().__init__()
        if kind not in (
            HeuristicKind.HADD_COST,
            HeuristicKind.RP_COST,
            HeuristicKind.RP_SIZE_CHEAP,
            HeuristicKind.RP_SIZE_SHORT,
        ):
            raise ValueError(f"{kind.value} is not a delete-relaxation heuristic")
        self.task = _compiled(task)
        self.kind = kind
        self.excluded = excluded
        self._unit_costs = [1] * len(self.task.actions) if kind is HeuristicKind.RP_SIZE_SHORT else None

    def _compute(self, state: int) -> HeuristicValue:
        table = hadd_propagate(self.task, state, costs=self._unit_costs, excluded=self.excluded)
        if math.isinf(table.goal_cost):
            return DEAD_END
        plan = extract_relaxed_plan(self.task, state, table)
        if self.kind is HeuristicKind.HADD_COST:
            return HeuristicValue(table.goal_cost, plan.size)
        return HeuristicValue(plan.total_cost, plan.size)

    def without(self, action: int) -> "RelaxedPlanHeuristic":
        return RelaxedPlanHeuristic(self.task, self.kind, self.excluded | {action})


def h_rp(kind: HeuristicKind, task: GroundedTask | CompiledTask):
    return RelaxedPlanHeuristic(task, kind).estimate


def h_without(heuristic: Heuristic, excluded_action) -> Heuristic:
    return heuristic.without(excluded_action)


def make_heuristic(kind: HeuristicKind, problem) -> Heuristic:
    """Build a fresh heuristic instance of ``kind`` bound to ``problem``."""
    from src.domains import BranchingTrapProblem, CycleTrapProblem

    if kind is HeuristicKind.ZERO:
        return ZeroHeuristic()
    if kind is HeuristicKind.EXACT:
        if isinstance(problem, CycleTrapProblem):
            return CycleExactHeuristic(problem.config)
        if isinstance(problem, BranchingTrapProblem):
            return BranchingExactHeuristic(problem.config)
        raise ValueError("exact heuristic is only available for the cycle and branching traps")
    if not isinstance(problem, GroundedProblem):
        raise ValueError(f"{kind.value} needs a grounded task")
    return RelaxedPlanHeuristic(problem.compiled, kind)
