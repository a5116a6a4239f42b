from enum import Enum
from fractions import Fraction

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from src.evaluators import EvaluatorConfig, EvaluatorKind, TieBreak, parse_rational
from src.heuristics import HeuristicKind
from src.search import SearchLimits


class DomainKind(str, Enum):
    CYCLE = "cycle"
    BTREE = "btree"
    RENDEZVOUS = "rendezvous"
    CHAIN = "chain"
    TASKFILE = "taskfile"
    RANDOM = "random"


class DomainParams(BaseModel):
    """Domain parameters; only the ones relevant to the chosen domain are set."""

    model_config = ConfigDict(frozen=True)

    # cycle
    k: int | None = Field(None, ge=2)
    goal: int | None = None
    expensive_cost: int | None = Field(None, ge=1)
    # btree
    x: int | None = Field(None, ge=1)
    y: int | None = Field(None, ge=1)
    high_cost: int | None = Field(None, ge=1)
    low_cost: int | None = Field(None, ge=1)
    goal_high: int | None = Field(None, ge=0)
    goal_low: int | None = Field(None, ge=0)
    depth_cap: int | None = Field(None, ge=0)
    # travel
    passengers: int | None = Field(None, ge=1)
    planes: int | None = Field(None, ge=1)
    chain_length: int | None = Field(None, ge=2)
    passenger_cities: tuple[str, ...] | None = None
    plane_cities: tuple[str, ...] | None = None
    passenger_goals: tuple[str, ...] | None = None
    # taskfile
    file: str | None = None
    # random
    seed: int | None = None
    facts: int | None = Field(None, ge=2)
    actions: int | None = Field(None, ge=1)
    max_cost: int | None = Field(None, ge=1)

    def canonical(self) -> str:
        """Stable ``key=value`` rendering of the parameters that are set."""
        parts = []
        for name, value in self.model_dump(exclude_none=True).items():
            if isinstance(value, (tuple, list)):
                value = "+".join(value)
            parts.append(f"{name}={value}")
        return ",".join(parts)


class RunSpec(BaseModel):
    """One search run: domain instance, evaluator, heuristics, limits."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    run_id: str | None = Field(None, pattern=r"^[A-Za-z0-9_.-]+$")
    domain: DomainKind
    params: DomainParams = DomainParams()
    evaluator: EvaluatorConfig = EvaluatorConfig()
    heuristic: HeuristicKind = HeuristicKind.ZERO
    prune_heuristic: HeuristicKind = HeuristicKind.ZERO
    limits: SearchLimits = SearchLimits()
    lookahead: bool = False
    plateau_tau: Fraction | None = None

    @field_validator("prune_heuristic")
    @classmethod
    def validate_prune(cls, v: HeuristicKind) -> HeuristicKind:
        if v not in (HeuristicKind.ZERO, HeuristicKind.EXACT):
            raise ValueError("prune heuristic must be admissible: zero or exact")
        return v

    @field_validator("plateau_tau", mode="before")
    @classmethod
    def validate_tau(cls, v) -> Fraction | None:
        if v is None:
            return None
        tau = parse_rational(v)
        if tau < 0:
            raise ValueError("plateau_tau must be nonnegative")
        return tau

    @field_serializer("plateau_tau")
    def serialize_tau(self, tau: Fraction | None) -> str | None:
        return None if tau is None else str(tau)

    @property
    def problem_id(self) -> str:
        return f"{self.domain.value}:{self.params.canonical()}"

    @property
    def variant(self) -> str:
        """Label grouping runs that differ only in the instance."""
        ev = self.evaluator
        label = ev.kind.value
        if ev.kind is EvaluatorKind.WEIGHTED_COST:
            label += f"(w={ev.weight})"
        if ev.tiebreak is not TieBreak.NONE:
            label += f"+tb-{ev.tiebreak.value}"
        label += f"/{self.heuristic.value}"
        if self.lookahead:
            label += "+useful"
        return label


class EventRecord(BaseModel):
    event_index: int
    expansions_at_event: int
    ms_at_event: int
    cost: int
    size: int
    plan: list[str] = []


class RunRecord(BaseModel):
    """A finished run: spec echo, statistics, solution events and status."""

    run_id: str
    problem_id: str
    domain: str
    params: str
    eval: str
    tiebreak: str
    heur: str
    prune_heur: str
    lookahead: bool
    variant: str
    status: str
    expansions: int = 0
    generations: int = 0
    reopenings: int = 0
    duplicates_pruned: int = 0
    bound_prunes: int = 0
    heuristic_calls: int = 0
    lookahead_invocations: int = 0
    discovery_expansions: int | None = None
    proof_expansions: int | None = None
    discovery_ms: int | None = None
    first_cost: int | None = None
    first_size: int | None = None
    best_cost: int | None = None
    best_size: int | None = None
    oracle_cost: int | None = None
    max_cost: int | None = None
    wall_ms: int = 0
    events: list[EventRecord] = []
    error: str | None = None

    @property
    def solved(self) -> bool:
        return self.best_cost is not None


class OracleRequest(BaseModel):
    domain: DomainKind
    params: DomainParams = DomainParams()
    state_cap: int = Field(100_000, gt=0)


class OracleResponse(BaseModel):
    problem_id: str
    reachable_states: int
    optimal_cost: int | None
    optimal_size: int | None


class TaskSummary(BaseModel):
    name: str
    facts: int
    actions: int
    epsilon: str | None = None


class HealthResponse(BaseModel):
    """Health check response."""

    status: str
    version: str
    uptime: float
