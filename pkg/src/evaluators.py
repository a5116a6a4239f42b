"""Evaluation functions: cost-based, size-based, cost-sensitive size-based, hybrid, weighted."""

import logging
import math
from enum import Enum
from fractions import Fraction
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from src.graph import SearchNode, SearchProblem, UnknownCostBounds
from src.heuristics import HeuristicValue

logger = logging.getLogger(__name__)


class EvaluatorKind(str, Enum):
    COST = "cost"
    SIZE = "size"
    CS_SIZE = "cs-size"
    HYBRID = "hybrid"
    WEIGHTED_COST = "wcost"


class TieBreak(str, Enum):
    NONE = "none"
    ON_COST = "cost"
    ON_SIZE = "size"


class Priority(NamedTuple):
    """Open-list key, ordered lexicographically (primary, tiebreak, seq)."""

    primary: int | Fraction | float
    tiebreak: int | Fraction | float
    seq: int

    @property
    def pruned(self) -> bool:
        """True for dead ends; such entries never reach the open list."""
        return math.isinf(self.primary)


def parse_rational(value) -> Fraction:
    """Accept ints, Fractions and strings such as ``"3/2"`` or ``"0.5"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


class EvaluatorConfig(BaseModel):
    """Which evaluation function orders the open list, and how ties break."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: EvaluatorKind = EvaluatorKind.COST
    tiebreak: TieBreak = TieBreak.NONE
    weight: Fraction = Field(default=Fraction(1), description="WEIGHTED_COST only")
    max_cost: int | None = Field(None, ge=1, description="HYBRID normalization constant")

    @field_validator("weight", mode="before")
    @classmethod
    def validate_weight(cls, v) -> Fraction:
        weight = parse_rational(v)
        if weight < 1:
            raise ValueError("weight must be >= 1")
        return weight

    @field_serializer("weight")
    def serialize_weight(self, weight: Fraction) -> str:
        return str(weight)


def f_cost(node: SearchNode, value: HeuristicValue) -> Priority:
    """Cheapest-completion-first: g_c + h_c."""
    return Priority(node.g_cost + value.cost, 0, node.seq)


def f_size(node: SearchNode, value: HeuristicValue) -> Priority:
    """Canonical size-based: g_s + h_s."""
    return Priority(node.g_size + value.size, 0, node.seq)


def f_cs_size(node: SearchNode, value: HeuristicValue) -> Priority:
    """Cost-sensitive size-based: g_s + size of the cheapest completion."""
    return Priority(node.g_size + value.size, 0, node.seq)


def f_hybrid(node: SearchNode, value: HeuristicValue, max_cost: int) -> Priority:
    """Size term plus the cost term normalized by ``max_cost``."""
    if value.is_dead_end:
        return Priority(math.inf, 0, node.seq)
    size_term = node.g_size + value.size
    cost_term = Fraction(node.g_cost + value.cost, max_cost)
    return Priority(size_term + cost_term, 0, node.seq)


def f_weighted(node: SearchNode, value: HeuristicValue, weight: Fraction) -> Priority:
    if value.is_dead_end:
        return Priority(math.inf, 0, node.seq)
    primary = node.g_cost + weight * value.cost
    if primary.denominator == 1:
        primary = primary.numerator
    return Priority(primary, 0, node.seq)


def tiebreak_key(node: SearchNode, config: EvaluatorConfig, value: HeuristicValue):
    if config.tiebreak is TieBreak.ON_COST:
        return node.g_cost + value.cost
    if config.tiebreak is TieBreak.ON_SIZE:
        return node.g_size + value.size
    return 0


class Evaluator:
    """An EvaluatorConfig bound to one problem's cost range."""

    def __init__(self, config: EvaluatorConfig, max_cost: int | None = None):
        self.config = config
        self.max_cost = max_cost

    @classmethod
    def bind(cls, config: EvaluatorConfig, problem: SearchProblem) -> "Evaluator":
        if config.kind is not EvaluatorKind.HYBRID:
            bounds = problem.cost_bounds()
            return cls(config, bounds[1] if bounds else None)

        bounds = problem.cost_bounds()
        if config.max_cost is None:
            if bounds is None:
                raise UnknownCostBounds("HYBRID needs max_cost or a problem with known cost bounds")
            max_cost = bounds[1]
        else:
            max_cost = config.max_cost
            if bounds is not None and max_cost < bounds[1]:
                raise ValueError(
                    f"HYBRID max_cost {max_cost} is below the maximum edge cost {bounds[1]}"
                )
        logger.debug(f"Hybrid evaluator normalizes costs by {max_cost}")
        return cls(config, max_cost)

    def priority(self, node: SearchNode, value: HeuristicValue) -> Priority:
        kind = self.config.kind
        if kind is EvaluatorKind.COST:
            base = f_cost(node, value)
        elif kind is EvaluatorKind.SIZE:
            base = f_size(node, value)
        elif kind is EvaluatorKind.CS_SIZE:
            base = f_cs_size(node, value)
        elif kind is EvaluatorKind.HYBRID:
            base = f_hybrid(node, value, self.max_cost)
        else:
            base = f_weighted(node, value, self.config.weight)
        return base._replace(tiebreak=tiebreak_key(node, self.config, value))

    def g_component(self, node: SearchNode) -> int:
        """The g-value this evaluator accumulates along a path."""
        if self.config.kind in (EvaluatorKind.SIZE, EvaluatorKind.CS_SIZE):
            return node.g_size
        return node.g_cost
