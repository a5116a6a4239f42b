"""STRIPS-with-costs tasks: model, line-oriented text format and grounding into a search problem."""

import logging
from dataclasses import dataclass
from typing import Iterable

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.graph import OutEdge, Plan

logger = logging.getLogger(__name__)


class TaskFormatError(ValueError):
    """A task text could not be parsed; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line else message)


def is_token(name: str) -> bool:
    """True when ``name`` survives the text format as one token: non-empty, no whitespace, no '#'."""
    return bool(name) and "#" not in name and name.split() == [name] and name.splitlines() == [name]


def _check_token(kind: str, name: str) -> str:
    if not is_token(name):
        raise ValueError(f"{kind} name {name!r} must be one token without whitespace or '#'")
    return name


def _is_index(token: str) -> bool:
    return token.isascii() and token.isdecimal()


class TaskAction(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    cost: int = Field(..., ge=1)
    pre: frozenset[int] = frozenset()
    add: frozenset[int] = frozenset()
    delete: frozenset[int] = frozenset()

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        return _check_token("action", v)

    @model_validator(mode="after")
    def check_effects(self) -> "TaskAction":
        overlap = self.add & self.delete
        if overlap:
            raise ValueError(f"action {self.name} adds and deletes facts {sorted(overlap)}")
        return self


class GroundedTask(BaseModel):
    """Facts are indexed 0..F-1; init, goal and action effects refer to those indices."""

    model_config = ConfigDict(frozen=True)

    name: str
    facts: tuple[str, ...]
    init: frozenset[int] = frozenset()
    goal: frozenset[int] = frozenset()
    actions: tuple[TaskAction, ...] = ()

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        return _check_token("task", v)

    @field_validator("facts")
    @classmethod
    def validate_facts(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        for fact in v:
            _check_token("fact", fact)
        return v

    @model_validator(mode="after")
    def check_indices(self) -> "GroundedTask":
        count = len(self.facts)
        if len(set(self.facts)) != count:
            raise ValueError("duplicate fact names")
        if len({a.name for a in self.actions}) != len(self.actions):
            raise ValueError("duplicate action names")
        for label, indices in (("init", self.init), ("goal", self.goal)):
            bad = [i for i in indices if not 0 <= i < count]
            if bad:
                raise ValueError(f"{label} refers to unknown facts {sorted(bad)}")
        for action in self.actions:
            for indices in (action.pre, action.add, action.delete):
                bad = [i for i in indices if not 0 <= i < count]
                if bad:
                    raise ValueError(f"action {action.name} refers to unknown facts {sorted(bad)}")
        return self

    def fact_index(self, name: str) -> int:
        return self.facts.index(name)


# Text format

_TOP_LEVEL = {"task", "fact", "init", "goal", "action"}
_BLOCK_LEVEL = {"pre", "add", "del", "end"}


def _indices(tokens: list[str], line: int) -> list[int]:
    values = []
    for token in tokens:
        if not _is_index(token):
            raise TaskFormatError(line, f"expected a fact index, got {token!r}")
        values.append(int(token))
    return values


def parse_task(text: str) -> GroundedTask:
    """Parse the line-oriented task format; diagnostics carry line numbers."""
    name = None
    facts: list[str] = []
    init: list[int] | None = None
    goal: list[int] | None = None
    actions: list[dict] = []
    references: list[tuple[int, int]] = []  # (line, fact index)
    block: dict | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        directive, args = tokens[0], tokens[1:]

        if directive not in _TOP_LEVEL | _BLOCK_LEVEL:
            raise TaskFormatError(number, f"unknown directive {directive!r}")

        if block is not None:
            if directive not in _BLOCK_LEVEL:
                raise TaskFormatError(number, f"{directive!r} inside an action block (missing 'end'?)")
            if directive == "end":
                if args:
                    raise TaskFormatError(number, "'end' takes no arguments")
                overlap = set(block["add"]) & set(block["delete"])
                if overlap:
                    raise TaskFormatError(
                        block["line"], f"action {block['name']} adds and deletes facts {sorted(overlap)}"
                    )
                actions.append(block)
                block = None
                continue
            key = "delete" if directive == "del" else directive
            if key in block["seen"]:
                raise TaskFormatError(number, f"duplicate {directive!r} in action {block['name']}")
            block["seen"].add(key)
            values = _indices(args, number)
            references.extend((number, v) for v in values)
            block[key] = values
            continue

        if directive in _BLOCK_LEVEL:
            raise TaskFormatError(number, f"{directive!r} outside an action block")

        if directive == "task":
            if name is not None:
                raise TaskFormatError(number, "duplicate 'task' directive")
            if len(args) != 1:
                raise TaskFormatError(number, "'task' takes exactly one name")
            name = args[0]
        elif directive == "fact":
            if len(args) != 2:
                raise TaskFormatError(number, "'fact' takes an index and a name")
            index = _indices(args[:1], number)[0]
            if index != len(facts):
                raise TaskFormatError(number, f"fact index {index} out of sequence (expected {len(facts)})")
            if args[1] in facts:
                raise TaskFormatError(number, f"duplicate fact name {args[1]!r}")
            facts.append(args[1])
        elif directive in ("init", "goal"):
            if (init if directive == "init" else goal) is not None:
                raise TaskFormatError(number, f"duplicate {directive!r} directive")
            values = _indices(args, number)
            references.extend((number, v) for v in values)
            if directive == "init":
                init = values
            else:
                goal = values
        else:  # action
            if len(args) != 2:
                raise TaskFormatError(number, "'action' takes a name and a cost")
            action_name, cost_token = args
            if not _is_index(cost_token) or int(cost_token) < 1:
                raise TaskFormatError(number, f"cost must be a positive integer, got {cost_token!r}")
            if any(a["name"] == action_name for a in actions):
                raise TaskFormatError(number, f"duplicate action name {action_name!r}")
            block = {
                "name": action_name,
                "cost": int(cost_token),
                "pre": [],
                "add": [],
                "delete": [],
                "seen": set(),
                "line": number,
            }

    if block is not None:
        raise TaskFormatError(block["line"], f"action {block['name']} is not closed with 'end'")
    if name is None:
        raise TaskFormatError(0, "missing 'task' directive")
    for line, index in references:
        if index >= len(facts):
            raise TaskFormatError(line, f"fact index {index} out of range (task has {len(facts)} facts)")

    return GroundedTask(
        name=name,
        facts=tuple(facts),
        init=frozenset(init or ()),
        goal=frozenset(goal or ()),
        actions=tuple(
            TaskAction(
                name=a["name"],
                cost=a["cost"],
                pre=frozenset(a["pre"]),
                add=frozenset(a["add"]),
                delete=frozenset(a["delete"]),
            )
            for a in actions
        ),
    )


def _join(directive: str, indices: Iterable[int]) -> str:
    return " ".join([directive, *(str(i) for i in sorted(indices))])


def serialize_task(task: GroundedTask) -> str:
    """Byte-deterministic rendering: facts ascending, actions in declaration order."""
    lines = [f"task {task.name}"]
    lines += [f"fact {index} {name}" for index, name in enumerate(task.facts)]
    lines.append(_join("init", task.init))
    lines.append(_join("goal", task.goal))
    for action in task.actions:
        lines.append(f"action {action.name} {action.cost}")
        lines.append(_join("pre", action.pre))
        lines.append(_join("add", action.add))
        lines.append(_join("del", action.delete))
        lines.append("end")
    return "\n".join(lines) + "\n"


# Compiled form: fact sets as integer bitmasks


def mask_of(facts: Iterable[int]) -> int:
    mask = 0
    for fact in facts:
        mask |= 1 << fact
    return mask


def facts_of(mask: int) -> frozenset[int]:
    facts = []
    index = 0
    while mask:
        if mask & 1:
            facts.append(index)
        mask >>= 1
        index += 1
    return frozenset(facts)


@dataclass(frozen=True, slots=True)
class CompiledAction:
    index: int
    cost: int
    pre: tuple[int, ...]
    add: tuple[int, ...]
    pre_mask: int
    add_mask: int
    del_mask: int


@dataclass(frozen=True)
class CompiledTask:
    n_facts: int
    actions: tuple[CompiledAction, ...]
    init_mask: int
    goal: tuple[int, ...]
    goal_mask: int
    pre_of: tuple[tuple[int, ...], ...]  # fact -> actions that need it
    no_pre: tuple[int, ...]  # actions applicable from any state


def compile_task(task: GroundedTask) -> CompiledTask:
    actions = tuple(
        CompiledAction(
            index=i,
            cost=a.cost,
            pre=tuple(sorted(a.pre)),
            add=tuple(sorted(a.add)),
            pre_mask=mask_of(a.pre),
            add_mask=mask_of(a.add),
            del_mask=mask_of(a.delete),
        )
        for i, a in enumerate(task.actions)
    )
    pre_of: list[list[int]] = [[] for _ in task.facts]
    for action in actions:
        for fact in action.pre:
            pre_of[fact].append(action.index)
    return CompiledTask(
        n_facts=len(task.facts),
        actions=actions,
        init_mask=mask_of(task.init),
        goal=tuple(sorted(task.goal)),
        goal_mask=mask_of(task.goal),
        pre_of=tuple(tuple(p) for p in pre_of),
        no_pre=tuple(a.index for a in actions if not a.pre),
    )


class GroundedProblem:
    """Search problem over fact sets; a state key is the bitmask of true facts.

    The bitmask is itself the canonical fingerprint, so distinct fact sets never collide.
    """

    def __init__(self, task: GroundedTask):
        self.task = task
        self.compiled = compile_task(task)
        self.initial = self.compiled.init_mask

    def is_goal(self, state: int) -> bool:
        goal_mask = self.compiled.goal_mask
        return state & goal_mask == goal_mask

    def expand(self, state: int) -> list[OutEdge]:
        edges = []
        for action in self.compiled.actions:
            if state & action.pre_mask == action.pre_mask:
                successor = (state & ~action.del_mask) | action.add_mask
                edges.append(OutEdge(action.index, successor, action.cost))
        return edges

    def cost_bounds(self) -> tuple[int, int] | None:
        if not self.task.actions:
            return None
        costs = [a.cost for a in self.task.actions]
        return min(costs), max(costs)

    def action_names(self, plan: Plan) -> list[str]:
        return [self.task.actions[i].name for i in plan.actions]

    def describe(self, state: int) -> list[str]:
        return [self.task.facts[i] for i in sorted(facts_of(state))]


def ground_problem(task: GroundedTask) -> GroundedProblem:
    logger.debug(f"Grounding task {task.name}: {len(task.facts)} facts, {len(task.actions)} actions")
    return GroundedProblem(task)


def validate_plan(task: GroundedTask, actions: Iterable[int]) -> bool:
    """Execute ``actions`` (indices) from init with full STRIPS semantics; True iff the goal holds."""
    state = set(task.init)
    for index in actions:
        action = task.actions[index]
        if not action.pre <= state:
            return False
        state = (state - action.delete) | action.add
    return task.goal <= state
