"""Benchmark harness: instance building, Dijkstra oracle, run matrices, IPC scores, anytime curves."""

import hashlib
import heapq
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from hashids import Hashids
from pydantic import ValidationError

from src.config import settings
from src.domains import (
    BranchingTrapConfig,
    CycleTrapConfig,
    TravelConfig,
    TravelVariant,
    branching_trap,
    chain_swap_task,
    cycle_trap,
    random_task,
    rendezvous_task,
)
from src.evaluators import EvaluatorConfig, EvaluatorKind, TieBreak
from src.graph import SearchProblem
from src.heuristics import HeuristicKind, make_heuristic
from src.models import DomainKind, DomainParams, EventRecord, RunRecord, RunSpec
from src.observability import oracle_counter, runs_completed_counter, runs_failed_counter, runs_started_counter
from src.search import ConfigError, SearchLimits, SearchOutcome, SearchStatus, best_first_bnb
from src.tasks import GroundedProblem, ground_problem, parse_task

logger = logging.getLogger(__name__)

hashids = Hashids(min_length=settings.run_id_length, alphabet="abcdefghijklmnopqrstuvwxyz0123456789")

FAILED = "FAILED"


class OracleCapExceeded(RuntimeError):
    """The reachable state space is larger than the oracle's cap."""


class InvariantViolation(RuntimeError):
    """A proven-optimal run disagrees with the oracle."""


# Instances


def build_problem(domain: DomainKind, params: DomainParams) -> SearchProblem:
    """Construct the search problem a RunSpec's domain part describes."""
    if domain is DomainKind.CYCLE:
        if params.k is None:
            raise ConfigError("cycle domain needs k")
        return cycle_trap(
            CycleTrapConfig(k=params.k, expensive_cost=params.expensive_cost, goal_residue=params.goal)
        )
    if domain is DomainKind.BTREE:
        fields = ("x", "y", "high_cost", "low_cost", "goal_high", "goal_low", "depth_cap")
        values = {name: getattr(params, name) for name in fields if getattr(params, name) is not None}
        return branching_trap(BranchingTrapConfig(**values))
    if domain is DomainKind.RENDEZVOUS:
        config = TravelConfig(
            variant=TravelVariant.RENDEZVOUS,
            passengers=params.passengers or 2,
            planes=params.planes or 1,
            passenger_cities=params.passenger_cities,
            plane_cities=params.plane_cities,
            passenger_goals=params.passenger_goals,
        )
        return ground_problem(rendezvous_task(config))
    if domain is DomainKind.CHAIN:
        config = TravelConfig(
            variant=TravelVariant.CHAIN_SWAP,
            passengers=params.passengers or 2,
            planes=params.planes or 2,
            chain_length=params.chain_length or 2,
            passenger_cities=params.passenger_cities,
            plane_cities=params.plane_cities,
            passenger_goals=params.passenger_goals,
        )
        return ground_problem(chain_swap_task(config))
    if domain is DomainKind.TASKFILE:
        if not params.file:
            raise ConfigError("taskfile domain needs a file")
        path = Path(params.file)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read task file {path}: {e}") from e
        return ground_problem(parse_task(text))
    return ground_problem(
        random_task(
            seed=params.seed or 0,
            facts=params.facts or 8,
            actions=params.actions or 12,
            max_cost=params.max_cost or 10,
        )
    )


# Oracle


def dijkstra_oracle(problem: SearchProblem, state_cap: int) -> dict:
    """Exact (cost, size) for every reachable state; size is minimal among cheapest paths."""
    oracle_counter["count"] += 1
    counter = itertools.count()
    settled: dict = {}
    heap = [(0, 0, next(counter), problem.initial)]
    while heap:
        cost, size, _, state = heapq.heappop(heap)
        if state in settled:
            continue
        settled[state] = (cost, size)
        if len(settled) > state_cap:
            raise OracleCapExceeded(f"more than {state_cap} reachable states")
        for edge in problem.expand(state):
            if edge.target not in settled:
                heapq.heappush(heap, (cost + edge.cost, size + 1, next(counter), edge.target))
    return settled


def oracle_optimum(problem: SearchProblem, state_cap: int) -> tuple[int, int] | None:
    """Cheapest goal (cost, size), or None when no goal is reachable."""
    distances = dijkstra_oracle(problem, state_cap)
    goals = [value for state, value in distances.items() if problem.is_goal(state)]
    return min(goals) if goals else None


# Runs


def derive_run_id(spec: RunSpec, attempt: int = 0) -> str:
    """Deterministic run id from the run spec contents."""
    payload = spec.model_dump_json(exclude={"run_id"}).encode() + str(attempt).encode()
    digest = hashlib.sha256(payload).digest()
    return hashids.encode(int.from_bytes(digest[:8], byteorder="big"))


def assign_run_ids(specs: Sequence[RunSpec]) -> list[RunSpec]:
    taken = {s.run_id for s in specs if s.run_id}
    if len(taken) != sum(1 for s in specs if s.run_id):
        raise ConfigError("run ids must be unique within a matrix")
    assigned = []
    for spec in specs:
        if spec.run_id:
            assigned.append(spec)
            continue
        for attempt in range(5):
            run_id = derive_run_id(spec, attempt)
            if run_id not in taken:
                break
        else:
            raise ConfigError("failed to generate a unique run id")
        taken.add(run_id)
        assigned.append(spec.model_copy(update={"run_id": run_id}))
    return assigned


def _plan_labels(problem: SearchProblem, plan) -> list[str]:
    if isinstance(problem, GroundedProblem):
        return problem.action_names(plan)
    return [str(action) for action in plan.actions]


def record_from_outcome(spec: RunSpec, problem: SearchProblem, outcome: SearchOutcome, oracle_cost: int | None) -> RunRecord:
    events = [
        EventRecord(
            event_index=i,
            expansions_at_event=e.expansions_at_event,
            ms_at_event=e.wall_ms_at_event,
            cost=e.cost,
            size=e.size,
            plan=_plan_labels(problem, e.plan),
        )
        for i, e in enumerate(outcome.events)
    ]
    stats = outcome.stats
    first = events[0] if events else None
    last = events[-1] if events else None
    return RunRecord(
        run_id=spec.run_id,
        problem_id=spec.problem_id,
        domain=spec.domain.value,
        params=spec.params.canonical(),
        eval=spec.evaluator.kind.value,
        tiebreak=spec.evaluator.tiebreak.value,
        heur=spec.heuristic.value,
        prune_heur=spec.prune_heuristic.value,
        lookahead=spec.lookahead,
        variant=spec.variant,
        status=outcome.status.value,
        expansions=stats.expansions,
        generations=stats.generations,
        reopenings=stats.reopenings,
        duplicates_pruned=stats.duplicates_pruned,
        bound_prunes=stats.bound_prunes,
        heuristic_calls=stats.heuristic_calls,
        lookahead_invocations=stats.lookahead_invocations,
        discovery_expansions=stats.discovery_expansions,
        proof_expansions=stats.proof_expansions,
        discovery_ms=last.ms_at_event if last else None,
        first_cost=first.cost if first else None,
        first_size=first.size if first else None,
        best_cost=last.cost if last else None,
        best_size=last.size if last else None,
        oracle_cost=oracle_cost,
        max_cost=outcome.max_cost,
        wall_ms=outcome.wall_ms,
        events=events,
    )


def execute_run(spec: RunSpec, oracle_cost: int | None = None) -> RunRecord:
    """Run one spec and check a proven result against the oracle."""
    problem = build_problem(spec.domain, spec.params)
    outcome = best_first_bnb(
        problem,
        spec.evaluator,
        make_heuristic(spec.heuristic, problem),
        prune_heuristic=make_heuristic(spec.prune_heuristic, problem),
        limits=spec.limits,
        lookahead=spec.lookahead,
        plateau_tau=spec.plateau_tau,
    )
    record = record_from_outcome(spec, problem, outcome, oracle_cost)
    if (
        outcome.status is SearchStatus.PROVED_OPTIMAL
        and oracle_cost is not None
        and record.best_cost != oracle_cost
    ):
        raise InvariantViolation(
            f"run {spec.run_id} proved cost {record.best_cost} but the oracle says {oracle_cost}"
        )
    return record


def _failed_record(spec: RunSpec, error: Exception, oracle_cost: int | None) -> RunRecord:
    return RunRecord(
        run_id=spec.run_id or "",
        problem_id=spec.problem_id,
        domain=spec.domain.value,
        params=spec.params.canonical(),
        eval=spec.evaluator.kind.value,
        tiebreak=spec.evaluator.tiebreak.value,
        heur=spec.heuristic.value,
        prune_heur=spec.prune_heuristic.value,
        lookahead=spec.lookahead,
        variant=spec.variant,
        status=FAILED,
        oracle_cost=oracle_cost,
        error=f"{type(error).__name__}: {error}",
    )


def _execute_safely(spec: RunSpec, oracle_cost: int | None) -> RunRecord:
    try:
        return execute_run(spec, oracle_cost)
    except InvariantViolation:
        raise
    except Exception as e:
        logger.error(f"Run {spec.run_id} failed: {e}")
        return _failed_record(spec, e, oracle_cost)


def _oracle_costs(specs: Sequence[RunSpec], state_cap: int) -> list[int | None]:
    cache: dict[str, int | None] = {}
    costs = []
    for spec in specs:
        key = spec.problem_id
        if key not in cache:
            cache[key] = None
            if state_cap > 0:
                try:
                    optimum = oracle_optimum(build_problem(spec.domain, spec.params), state_cap)
                    cache[key] = optimum[0] if optimum else None
                except OracleCapExceeded:
                    logger.info(f"Oracle skipped for {key}: state space exceeds {state_cap}")
                except Exception as e:
                    logger.error(f"Oracle failed for {key}: {e}")
        costs.append(cache[key])
    return costs


def count_runs(records: Sequence[RunRecord]):
    """Add finished records to the run counters; workers never touch them."""
    failed = sum(1 for r in records if r.status == FAILED)
    runs_started_counter["count"] += len(records)
    runs_completed_counter["count"] += len(records) - failed
    runs_failed_counter["count"] += failed


def run_matrix(
    specs: Sequence[RunSpec],
    parallelism: int | None = None,
    oracle_cap: int | None = None,
) -> list[RunRecord]:
    """Execute every spec; output order is spec order whatever the completion order."""
    if not specs:
        return []
    specs = assign_run_ids(specs)
    jobs = parallelism or settings.matrix_jobs
    cap = settings.oracle_state_cap if oracle_cap is None else oracle_cap
    oracle = _oracle_costs(specs, cap)
    logger.info(f"Running matrix of {len(specs)} runs with {jobs} job(s)")
    if jobs <= 1:
        records = [_execute_safely(spec, cost) for spec, cost in zip(specs, oracle)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_execute_safely, specs, oracle))
    count_runs(records)
    return records


# Scores


class Reference(str, Enum):
    ORACLE = "oracle"
    BEST_OF_RUNS = "best"


@dataclass(frozen=True)
class ScoreRow:
    problem_id: str
    run_id: str
    variant: str
    quality: Fraction
    solved: bool


@dataclass
class ScoreReport:
    """IPC-2008 quality scores: reference cost / achieved cost, 0 when unsolved."""

    reference: Reference
    reference_costs: dict[str, int | None]
    rows: list[ScoreRow]
    aggregates: dict[str, Fraction] = field(default_factory=dict)
    coverage: dict[str, int] = field(default_factory=dict)

    @property
    def problem_count(self) -> int:
        return len(self.reference_costs)

    def percentage(self, variant: str) -> Fraction:
        if not self.problem_count:
            return Fraction(0)
        return self.aggregates[variant] * 100 / self.problem_count

    def ranks(self) -> dict[str, int]:
        """Dense ranks by descending displayed percentage; equal displays share a rank."""
        shown = {v: round(float(self.percentage(v)), 1) for v in self.aggregates}
        ordered = sorted(set(shown.values()), reverse=True)
        return {v: ordered.index(s) + 1 for v, s in shown.items()}


def _group(records: Iterable[RunRecord]) -> dict[str, list[RunRecord]]:
    groups: dict[str, list[RunRecord]] = {}
    for record in records:
        groups.setdefault(record.problem_id, []).append(record)
    return groups


def reference_costs(records: Iterable[RunRecord], reference: Reference) -> dict[str, int | None]:
    """Oracle optimum where known (ORACLE reference), else the best cost any run achieved."""
    costs = {}
    for problem_id, group in _group(records).items():
        oracle = next((r.oracle_cost for r in group if r.oracle_cost is not None), None)
        if reference is Reference.ORACLE and oracle is not None:
            costs[problem_id] = oracle
            continue
        solved = [r.best_cost for r in group if r.best_cost is not None]
        costs[problem_id] = min(solved) if solved else None
    return costs


def _quality(reference: int | None, cost: int | None) -> Fraction:
    if reference is None or cost is None:
        return Fraction(0)
    if reference == 0:
        return Fraction(1) if cost == 0 else Fraction(0)
    return Fraction(reference, cost)


def ipc_score(records: Sequence[RunRecord], reference: Reference = Reference.ORACLE) -> ScoreReport:
    references = reference_costs(records, reference)
    report = ScoreReport(reference=reference, reference_costs=references, rows=[])
    for record in records:
        quality = _quality(references[record.problem_id], record.best_cost)
        report.rows.append(
            ScoreRow(
                problem_id=record.problem_id,
                run_id=record.run_id,
                variant=record.variant,
                quality=quality,
                solved=record.solved,
            )
        )
        report.aggregates[record.variant] = report.aggregates.get(record.variant, Fraction(0)) + quality
        report.coverage[record.variant] = report.coverage.get(record.variant, 0) + int(record.solved)
    return report


# Anytime curves


class CurveAxis(str, Enum):
    EXPANSIONS = "expansions"
    MS = "ms"


@dataclass
class AnytimeCurve:
    axis: CurveAxis
    instants: list[int]
    per_run: dict[str, list[Fraction]]
    per_variant: dict[str, list[Fraction]]


def anytime_curve(
    records: Sequence[RunRecord],
    instants: Sequence[int],
    axis: CurveAxis = CurveAxis.EXPANSIONS,
    reference: Reference = Reference.ORACLE,
) -> AnytimeCurve:
    """Score each run at each instant by the best solution it had reported by then."""
    if list(instants) != sorted(instants):
        raise ConfigError("curve instants must be ascending")
    references = reference_costs(records, reference)
    per_run: dict[str, list[Fraction]] = {}
    per_variant: dict[str, list[Fraction]] = {}
    for record in records:
        series = []
        for instant in instants:
            costs = [
                e.cost
                for e in record.events
                if (e.expansions_at_event if axis is CurveAxis.EXPANSIONS else e.ms_at_event) <= instant
            ]
            series.append(_quality(references[record.problem_id], min(costs) if costs else None))
        per_run[record.run_id] = series
        totals = per_variant.setdefault(record.variant, [Fraction(0)] * len(instants))
        per_variant[record.variant] = [a + b for a, b in zip(totals, series)]
    return AnytimeCurve(axis=axis, instants=list(instants), per_run=per_run, per_variant=per_variant)


def find_crossover(curve: AnytimeCurve, leader: str, challenger: str) -> int | None:
    """First instant where ``challenger`` strictly overtakes ``leader`` after trailing or tying."""
    ahead = curve.per_variant[leader]
    behind = curve.per_variant[challenger]
    trailed = False
    for instant, a, b in zip(curve.instants, ahead, behind):
        if b <= a:
            trailed = True
        elif trailed:
            return instant
    return None


# Matrix configuration

_INT_PARAMS = {
    "k": "k",
    "goal": "goal",
    "expensive-cost": "expensive_cost",
    "x": "x",
    "y": "y",
    "high-cost": "high_cost",
    "low-cost": "low_cost",
    "goal-high": "goal_high",
    "goal-low": "goal_low",
    "depth-cap": "depth_cap",
    "passengers": "passengers",
    "planes": "planes",
    "chain-length": "chain_length",
    "seed": "seed",
    "facts": "facts",
    "actions": "actions",
    "max-cost": "max_cost",
}
_LIST_PARAMS = {
    "passenger-cities": "passenger_cities",
    "plane-cities": "plane_cities",
    "passenger-goals": "passenger_goals",
}
_RUN_KEYS = {
    "id",
    "domain",
    "file",
    "eval",
    "weight",
    "tiebreak",
    "heur",
    "prune-heur",
    "lookahead",
    "plateau-tau",
    "max-expansions",
    "max-seconds",
    "max-nodes",
    "hybrid-max-cost",
}
OPTION_KEYS = frozenset(_INT_PARAMS) | frozenset(_LIST_PARAMS) | _RUN_KEYS


def _as_int(key: str, value) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _as_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def spec_from_options(options: Mapping[str, object]) -> RunSpec:
    """Build a RunSpec from CLI-flag-named options (``max-expansions``, ``eval``, ...)."""
    unknown = sorted(set(options) - OPTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown option(s): {', '.join(unknown)}")
    if "domain" not in options:
        raise ConfigError("domain is required")

    params = {attr: _as_int(key, options[key]) for key, attr in _INT_PARAMS.items() if options.get(key) is not None}
    for key, attr in _LIST_PARAMS.items():
        if options.get(key):
            params[attr] = tuple(c.strip() for c in str(options[key]).split(",") if c.strip())
    if options.get("file"):
        params["file"] = str(options["file"])

    evaluator = {"kind": options.get("eval", EvaluatorKind.COST.value)}
    if options.get("tiebreak") is not None:
        evaluator["tiebreak"] = options["tiebreak"]
    if options.get("weight") is not None:
        evaluator["weight"] = str(options["weight"])
    if options.get("hybrid-max-cost") is not None:
        evaluator["max_cost"] = _as_int("hybrid-max-cost", options["hybrid-max-cost"])

    limits = {}
    if options.get("max-expansions") is not None:
        limits["max_expansions"] = _as_int("max-expansions", options["max-expansions"])
    if options.get("max-seconds") is not None:
        try:
            limits["max_wall_ms"] = int(Fraction(str(options["max-seconds"])) * 1000)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"max-seconds must be a number, got {options['max-seconds']!r}") from None
    if options.get("max-nodes") is not None:
        limits["max_nodes_in_memory"] = _as_int("max-nodes", options["max-nodes"])

    try:
        return RunSpec(
            run_id=options.get("id") or None,
            domain=options["domain"],
            params=DomainParams(**params),
            evaluator=EvaluatorConfig(**evaluator),
            heuristic=options.get("heur", HeuristicKind.ZERO.value),
            prune_heuristic=options.get("prune-heur", HeuristicKind.ZERO.value),
            limits=SearchLimits(**limits),
            lookahead=_as_bool("lookahead", options.get("lookahead", False)),
            plateau_tau=options.get("plateau-tau"),
        )
    except (ValidationError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(str(e)) from e


def parse_matrix_config(text: str) -> list[RunSpec]:
    """Parse ``[defaults]``/``[run]`` sections of ``key = value`` lines into RunSpecs."""
    defaults: dict[str, str] = {}
    blocks: list[tuple[int, dict[str, str]]] = []
    current: dict[str, str] | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[defaults]":
            current = defaults
            continue
        if line == "[run]":
            current = {}
            blocks.append((number, current))
            continue
        if current is None:
            raise ConfigError(f"line {number}: expected a [defaults] or [run] section header")
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in OPTION_KEYS:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        current[key] = value

    specs = []
    for number, block in blocks:
        try:
            specs.append(spec_from_options({**defaults, **block}))
        except ConfigError as e:
            raise ConfigError(f"run block at line {number}: {e}") from e
    return specs


def branching_sweep(
    high_cost: int = 8,
    lows: Sequence[int] = (4, 2, 1),
    kinds: Sequence[EvaluatorKind] = (EvaluatorKind.COST, EvaluatorKind.SIZE),
    depth_cap: int = 16,
    max_expansions: int | None = None,
    goal_low: int | None = None,
) -> list[RunSpec]:
    """Branching-trap runs while epsilon shrinks.

    By default the goal cost stays at twice the high cost, so goals get deeper as the low
    cost falls. A fixed ``goal_low`` keeps the goal mix (one high, ``goal_low`` low) instead.
    """
    specs = []
    for low in lows:
        if high_cost % low:
            raise ConfigError(f"low cost {low} must divide high cost {high_cost}")
        lows_in_goal = high_cost // low if goal_low is None else goal_low
        params = DomainParams(
            x=2, y=2, high_cost=high_cost, low_cost=low, goal_high=1, goal_low=lows_in_goal, depth_cap=depth_cap
        )
        suffix = "" if goal_low is None else f"-l{goal_low}"
        for kind in kinds:
            specs.append(
                RunSpec(
                    run_id=f"btree-e{low}of{high_cost}{suffix}-{kind.value}",
                    domain=DomainKind.BTREE,
                    params=params,
                    evaluator=EvaluatorConfig(kind=kind, tiebreak=TieBreak.NONE),
                    limits=SearchLimits(max_expansions=max_expansions),
                )
            )
    return specs
