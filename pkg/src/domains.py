"""Benchmark domains: the cycle and branching traps, travel tasks and random tasks."""

import logging
import random
from dataclasses import dataclass
from enum import Enum
from math import comb

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.graph import OutEdge
from src.tasks import GroundedTask, TaskAction, ground_problem

logger = logging.getLogger(__name__)

__all__ = [
    "BranchingTrapConfig",
    "BranchingTrapProblem",
    "CycleTrapConfig",
    "CycleTrapProblem",
    "TravelConfig",
    "TravelVariant",
    "branching_goal_count",
    "branching_trap",
    "chain_swap_task",
    "cycle_distance",
    "cycle_trap",
    "cycle_trap_optima",
    "ground_problem",
    "random_task",
    "rendezvous_task",
]


# Cycle trap


class CycleTrapConfig(BaseModel):
    """A k-bit counter; the edge between residues 0 and -1 is expensive."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=2)
    expensive_cost: int = Field(..., ge=1)
    goal_residue: int = Field(..., ge=0)

    @model_validator(mode="before")
    @classmethod
    def fill_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        k = data.get("k")
        if isinstance(k, int) and k >= 2:
            modulus = 2**k
            if data.get("expensive_cost") is None:
                data["expensive_cost"] = 2 ** (k - 1)
            goal = data.get("goal_residue")
            if goal is None:
                data["goal_residue"] = modulus - 2
            elif isinstance(goal, int) and -modulus <= goal < 0:
                data["goal_residue"] = goal + modulus
        return data

    @model_validator(mode="after")
    def check_goal(self) -> "CycleTrapConfig":
        if self.goal_residue >= self.modulus:
            raise ValueError(f"goal_residue must be below 2^k = {self.modulus}")
        return self

    @property
    def modulus(self) -> int:
        return 2**self.k


@dataclass(frozen=True)
class CycleTrapProblem:
    config: CycleTrapConfig
    initial: int = 0

    def is_goal(self, state: int) -> bool:
        return state == self.config.goal_residue

    def expand(self, state: int) -> list[OutEdge]:
        modulus = self.config.modulus
        expensive = self.config.expensive_cost
        last = modulus - 1
        return [
            OutEdge("inc", (state + 1) % modulus, expensive if state == last else 1),
            OutEdge("dec", (state - 1) % modulus, expensive if state == 0 else 1),
        ]

    def cost_bounds(self) -> tuple[int, int]:
        expensive = self.config.expensive_cost
        return min(1, expensive), max(1, expensive)


def cycle_trap(config: CycleTrapConfig) -> CycleTrapProblem:
    return CycleTrapProblem(config)


def _direction_costs(config: CycleTrapConfig, state: int, goal: int) -> tuple[tuple[int, int], tuple[int, int]]:
    modulus = config.modulus
    surcharge = config.expensive_cost - 1

    cw_steps = (goal - state) % modulus
    cw_cost = cw_steps + (surcharge if cw_steps and state > goal else 0)

    ccw_steps = (state - goal) % modulus
    ccw_cost = ccw_steps + (surcharge if ccw_steps and state < goal else 0)

    return (cw_cost, cw_steps), (ccw_cost, ccw_steps)


def cycle_distance(config: CycleTrapConfig, state: int, goal: int) -> tuple[int, int]:
    """Cheapest (cost, size) from ``state`` to ``goal``; shorter path wins cost ties."""
    return min(_direction_costs(config, state, goal))


def cycle_trap_optima(config: CycleTrapConfig, goal: int | None = None) -> tuple[tuple[int, int], tuple[int, int]]:
    """(cost, size) of the pure-increment and pure-decrement solutions from 0."""
    target = config.goal_residue if goal is None else goal % config.modulus
    return _direction_costs(config, 0, target)


# Branching trap


class BranchingTrapConfig(BaseModel):
    """A uniform tree with x high-cost and y low-cost children per node."""

    model_config = ConfigDict(frozen=True)

    x: int = Field(2, ge=1)
    y: int = Field(2, ge=1)
    high_cost: int = Field(8, ge=2)
    low_cost: int = Field(1, ge=1)
    goal_high: int = Field(1, ge=0)
    goal_low: int = Field(8, ge=0)
    depth_cap: int = Field(16, ge=0)

    @model_validator(mode="after")
    def check_shape(self) -> "BranchingTrapConfig":
        if not self.high_cost > self.low_cost:
            raise ValueError("high_cost must exceed low_cost")
        if self.depth_cap < self.goal_high + self.goal_low:
            raise ValueError("depth_cap must be at least goal_high + goal_low")
        return self


@dataclass(frozen=True)
class BranchingTrapProblem:
    """States are label sequences: labels below x are high-cost, the rest low-cost."""

    config: BranchingTrapConfig
    initial: tuple[int, ...] = ()

    def is_goal(self, state: tuple[int, ...]) -> bool:
        cfg = self.config
        highs = sum(1 for label in state if label < cfg.x)
        return highs == cfg.goal_high and len(state) - highs == cfg.goal_low

    def expand(self, state: tuple[int, ...]) -> list[OutEdge]:
        cfg = self.config
        if len(state) >= cfg.depth_cap:
            return []
        edges = [OutEdge(f"H{i + 1}", state + (i,), cfg.high_cost) for i in range(cfg.x)]
        edges += [OutEdge(f"L{j + 1}", state + (cfg.x + j,), cfg.low_cost) for j in range(cfg.y)]
        return edges

    def cost_bounds(self) -> tuple[int, int]:
        return self.config.low_cost, self.config.high_cost


def branching_trap(config: BranchingTrapConfig) -> BranchingTrapProblem:
    return BranchingTrapProblem(config)


def branching_goal_count(config: BranchingTrapConfig) -> int:
    """Number of goal nodes: C(H+L, H) * x^H * y^L."""
    h, l = config.goal_high, config.goal_low
    return comb(h + l, h) * config.x**h * config.y**l


# Travel


class TravelVariant(str, Enum):
    RENDEZVOUS = "rendezvous"
    CHAIN_SWAP = "chain"


class TravelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: TravelVariant = TravelVariant.RENDEZVOUS
    passengers: int = Field(2, ge=1)
    planes: int = Field(1, ge=1)
    chain_length: int = Field(2, ge=2)
    diagonal_cost: int = Field(7000, ge=1)
    exterior_cost: int = Field(10000, ge=1)
    board_cost: int = Field(1, ge=1)
    debark_cost: int = Field(1, ge=1)
    fly_cost: int = Field(1000, ge=1)
    passenger_cities: tuple[str, ...] | None = None
    plane_cities: tuple[str, ...] | None = None
    passenger_goals: tuple[str, ...] | None = None

    @model_validator(mode="after")
    def check_placements(self) -> "TravelConfig":
        if self.passenger_cities is not None and len(self.passenger_cities) != self.passengers:
            raise ValueError("passenger_cities must name one city per passenger")
        if self.plane_cities is not None and len(self.plane_cities) != self.planes:
            raise ValueError("plane_cities must name one city per plane")
        if self.passenger_goals is not None and len(self.passenger_goals) != self.passengers:
            raise ValueError("passenger_goals must name one city per passenger")
        return self


RENDEZVOUS_CORNERS = ("c1", "c2", "c3", "c4")
RENDEZVOUS_CENTER = "center"


def _travel_task(
    name: str,
    cities: list[str],
    edges: list[tuple[str, str, int]],
    passenger_start: list[str],
    passenger_goal: list[str],
    plane_start: list[str],
    board_cost: int,
    debark_cost: int,
) -> GroundedTask:
    passengers = [f"p{i + 1}" for i in range(len(passenger_start))]
    planes = [f"plane{i + 1}" for i in range(len(plane_start))]
    unknown = sorted(set(passenger_start + passenger_goal + plane_start) - set(cities))
    if unknown:
        raise ValueError(f"unknown cities {unknown}")

    facts: list[str] = []
    for p in passengers:
        facts += [f"at-{p}-{c}" for c in cities]
        facts += [f"in-{p}-{plane}" for plane in planes]
    for plane in planes:
        facts += [f"located-{plane}-{c}" for c in cities]
    index = {fact: i for i, fact in enumerate(facts)}

    actions: list[TaskAction] = []
    for plane in planes:
        for a, b, cost in edges:
            for src, dst in ((a, b), (b, a)):
                actions.append(
                    TaskAction(
                        name=f"fly-{plane}-{src}-{dst}",
                        cost=cost,
                        pre=frozenset({index[f"located-{plane}-{src}"]}),
                        add=frozenset({index[f"located-{plane}-{dst}"]}),
                        delete=frozenset({index[f"located-{plane}-{src}"]}),
                    )
                )
    for p in passengers:
        for plane in planes:
            for c in cities:
                at, inside, located = index[f"at-{p}-{c}"], index[f"in-{p}-{plane}"], index[f"located-{plane}-{c}"]
                actions.append(
                    TaskAction(
                        name=f"board-{p}-{plane}-{c}",
                        cost=board_cost,
                        pre=frozenset({at, located}),
                        add=frozenset({inside}),
                        delete=frozenset({at}),
                    )
                )
                actions.append(
                    TaskAction(
                        name=f"debark-{p}-{plane}-{c}",
                        cost=debark_cost,
                        pre=frozenset({inside, located}),
                        add=frozenset({at}),
                        delete=frozenset({inside}),
                    )
                )

    init = {index[f"at-{p}-{c}"] for p, c in zip(passengers, passenger_start)}
    init |= {index[f"located-{plane}-{c}"] for plane, c in zip(planes, plane_start)}
    goal = {index[f"at-{p}-{c}"] for p, c in zip(passengers, passenger_goal)}
    return GroundedTask(
        name=name,
        facts=tuple(facts),
        init=frozenset(init),
        goal=frozenset(goal),
        actions=tuple(actions),
    )


def rendezvous_task(config: TravelConfig) -> GroundedTask:
    """Four corner cities around a center; every passenger must reach the center unless
    ``passenger_goals`` names other destinations."""
    if config.variant is not TravelVariant.RENDEZVOUS:
        raise ValueError("rendezvous_task needs the RENDEZVOUS variant")
    cities = [*RENDEZVOUS_CORNERS, RENDEZVOUS_CENTER]
    ring = list(zip(RENDEZVOUS_CORNERS, RENDEZVOUS_CORNERS[1:] + RENDEZVOUS_CORNERS[:1]))
    edges = [(a, b, config.exterior_cost) for a, b in ring]
    edges += [(c, RENDEZVOUS_CENTER, config.diagonal_cost) for c in RENDEZVOUS_CORNERS]

    corners = len(RENDEZVOUS_CORNERS)
    passenger_start = list(config.passenger_cities or (RENDEZVOUS_CORNERS[i % corners] for i in range(config.passengers)))
    plane_start = list(config.plane_cities or (RENDEZVOUS_CORNERS[i % corners] for i in range(config.planes)))
    return _travel_task(
        name=f"rendezvous-p{config.passengers}-a{config.planes}",
        cities=cities,
        edges=edges,
        passenger_start=passenger_start,
        passenger_goal=list(config.passenger_goals or [RENDEZVOUS_CENTER] * config.passengers),
        plane_start=plane_start,
        board_cost=config.board_cost,
        debark_cost=config.debark_cost,
    )


def chain_swap_task(config: TravelConfig) -> GroundedTask:
    """Cities in a line; passengers at the two ends swap sides. Planes alternate ends.

    ``passenger_goals`` overrides the swap, e.g. to park passengers already at their goal.
    """
    if config.variant is not TravelVariant.CHAIN_SWAP:
        raise ValueError("chain_swap_task needs the CHAIN_SWAP variant")
    cities = [f"c{i + 1}" for i in range(config.chain_length)]
    first, last = cities[0], cities[-1]
    edges = [(a, b, config.fly_cost) for a, b in zip(cities, cities[1:])]
    passenger_start = list(config.passenger_cities or ((first if i % 2 == 0 else last) for i in range(config.passengers)))
    passenger_goal = list(config.passenger_goals or (last if start == first else first for start in passenger_start))
    plane_start = list(config.plane_cities or ((first if i % 2 == 0 else last) for i in range(config.planes)))
    return _travel_task(
        name=f"chain-m{config.chain_length}-p{config.passengers}-a{config.planes}",
        cities=cities,
        edges=edges,
        passenger_start=passenger_start,
        passenger_goal=passenger_goal,
        plane_start=plane_start,
        board_cost=config.board_cost,
        debark_cost=config.debark_cost,
    )


# Random tasks


def random_task(seed: int, facts: int = 8, actions: int = 12, max_cost: int = 10) -> GroundedTask:
    """A reproducible random STRIPS task; the same seed always yields the same task."""
    if facts < 2 or actions < 1 or max_cost < 1:
        raise ValueError("random_task needs facts >= 2, actions >= 1 and max_cost >= 1")
    rng = random.Random(seed)
    indices = list(range(facts))

    init = frozenset(rng.sample(indices, rng.randint(1, max(1, facts // 3))))
    goal = frozenset(rng.sample(indices, rng.randint(1, min(3, facts))))
    built = []
    for i in range(actions):
        pre = frozenset(rng.sample(indices, rng.randint(0, 2)))
        add = frozenset(rng.sample(indices, rng.randint(1, 2)))
        candidates = [f for f in indices if f not in add]
        delete = frozenset(rng.sample(candidates, rng.randint(0, min(1, len(candidates)))))
        built.append(TaskAction(name=f"a{i}", cost=rng.randint(1, max_cost), pre=pre, add=add, delete=delete))
    return GroundedTask(
        name=f"random-s{seed}",
        facts=tuple(f"f{i}" for i in indices),
        init=init,
        goal=goal,
        actions=tuple(built),
    )
