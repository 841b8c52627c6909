"""Level-bounded chase for inclusion and tuple-generating dependencies.

Each level fires exactly one rule on one premise. Pending (fact, dependency)
pairs sit in a FIFO queue seeded in fact-insertion order times dependency
order, so every persistently applicable pair is eventually fired and runs are
reproducible down to null ids.
"""

from __future__ import annotations

import enum
import itertools
import time
from collections import deque
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from .model import Dependency, DepKind, Fact, Instance, LabeledNull
from .textio import Program

DEFAULT_MAX_LEVEL = 10_000


class ChaseError(RuntimeError):
    pass


class Strategy(enum.Enum):
    RESTRICTED = "restricted"
    OBLIVIOUS = "oblivious"


@dataclass(frozen=True)
class ChaseConfig:
    """``max_level=None`` means unbounded, which needs the restricted strategy.

    ``timeout`` (seconds) is a wall-clock guard for unbounded runs.
    """

    max_level: Optional[int] = DEFAULT_MAX_LEVEL
    strategy: Strategy = Strategy.RESTRICTED
    trace: bool = False
    timeout: Optional[float] = None

    def __post_init__(self):
        if self.max_level is None:
            if self.strategy is not Strategy.RESTRICTED:
                raise ValueError("an unbounded chase requires the restricted strategy")
        elif self.max_level < 0:
            raise ValueError("max_level must be nonnegative")


@dataclass(frozen=True)
class FiringRecord:
    level: int
    dependency_index: int
    premise: Fact
    conclusion: Fact

    def render(self) -> str:
        return f"level {self.level}: dep#{self.dependency_index} + {self.premise} => {self.conclusion}"


@dataclass(frozen=True)
class ChaseResult:
    instance: Instance
    levels_run: int
    terminated: bool
    trace: Optional[Tuple[FiringRecord, ...]] = None

    def summary(self) -> str:
        return (
            f"levels={self.levels_run} terminated={str(self.terminated).lower()} "
            f"facts={len(self.instance)}"
        )


def apply_rule(dep: Dependency, premise: Fact, null_counter: Iterator[int]) -> Fact:
    """Fire ``dep`` on ``premise``.

    A TGD draws ``dep.n_existential`` consecutive ids from ``null_counter``
    (typically an ``itertools.count``).
    """
    if premise.relation != dep.source:
        raise ValueError(
            f"relation mismatch: dependency reads {dep.source.name}, premise is {premise.relation.name}"
        )
    if dep.kind is DepKind.ID:
        return Fact(dep.target, premise.args)
    carried = tuple(premise.args[p] for p in dep.frontier)
    fresh = tuple(LabeledNull(next(null_counter)) for _ in range(dep.n_existential))
    return Fact(dep.target, carried + fresh)


def _witness_key(dep: Dependency, premise: Fact):
    return tuple(premise.args[p] for p in dep.frontier)


def applicable(dep: Dependency, premise: Fact, current, strategy: Strategy = Strategy.RESTRICTED,
               fired=None) -> bool:
    """Whether ``dep`` may fire on ``premise`` given ``current`` facts.

    Oblivious: the pair has not fired before (``fired`` is the set of
    ``(dep, premise)`` pairs already used). Restricted: the conclusion (ID) or
    some witness ``target(frontier args, w...)`` (TGD) is absent.
    """
    if premise.relation != dep.source:
        return False
    if strategy is Strategy.OBLIVIOUS:
        return fired is None or (dep, premise) not in fired
    if dep.kind is DepKind.ID:
        return Fact(dep.target, premise.args) not in current
    key = _witness_key(dep, premise)
    k = len(key)
    return not any(f.relation == dep.target and f.args[:k] == key for f in current)


class _ChaseState:
    """Mutable working set with a witness index for restricted TGD checks."""

    def __init__(self, program: Program):
        self.deps = program.dependencies
        self.facts: List[Fact] = []
        self.members = set()
        # (relation name, prefix length) -> set of argument prefixes
        self.prefix_lengths = {}
        for d in self.deps:
            if d.is_tgd:
                self.prefix_lengths.setdefault(d.target.name, set()).add(len(d.frontier))
        self.prefixes = set()
        self.by_source = {}
        for i, d in enumerate(self.deps):
            self.by_source.setdefault(d.source.name, []).append(i)

    def add(self, f: Fact) -> bool:
        if f in self.members:
            return False
        self.members.add(f)
        self.facts.append(f)
        for k in self.prefix_lengths.get(f.relation.name, ()):
            self.prefixes.add((f.relation.name, f.args[:k]))
        return True

    def restricted_applicable(self, dep: Dependency, premise: Fact) -> bool:
        if dep.kind is DepKind.ID:
            return Fact(dep.target, premise.args) not in self.members
        return (dep.target.name, _witness_key(dep, premise)) not in self.prefixes

    def pairs_for(self, f: Fact):
        return [(f, i) for i in self.by_source.get(f.relation.name, ())]


def run_chase(program: Program, config: ChaseConfig = ChaseConfig()) -> ChaseResult:
    state = _ChaseState(program)
    queue = deque()
    for f in program.instance:
        state.add(f)
    for f in program.instance:
        queue.extend(state.pairs_for(f))

    counter = itertools.count()
    trace = [] if config.trace else None
    restricted = config.strategy is Strategy.RESTRICTED
    level = 0
    deadline = None if config.timeout is None else time.monotonic() + config.timeout

    while queue:
        if config.max_level is not None and level >= config.max_level:
            break
        if deadline is not None and time.monotonic() > deadline:
            raise ChaseError("chase did not terminate")
        premise, i = queue.popleft()
        dep = state.deps[i]
        # oblivious: each (fact, dep) pair is enqueued once, so a pop means "not fired yet"
        if restricted and not state.restricted_applicable(dep, premise):
            continue
        conclusion = apply_rule(dep, premise, counter)
        level += 1
        if trace is not None:
            trace.append(FiringRecord(level, i, premise, conclusion))
        if state.add(conclusion):
            queue.extend(state.pairs_for(conclusion))

    # at the cap, drop pairs that can never fire again: restricted
    # applicability only shrinks as facts are added
    if restricted:
        while queue and not state.restricted_applicable(state.deps[queue[0][1]], queue[0][0]):
            queue.popleft()
    terminated = not queue
    return ChaseResult(
        Instance(program.schema, state.facts),
        level,
        terminated,
        None if trace is None else tuple(trace),
    )


class Status(enum.Enum):
    PROVEN = "proven"
    REFUTED = "refuted"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Derivability:
    status: Status
    level: Optional[int] = None

    def __str__(self):
        if self.status is Status.UNKNOWN:
            return f"Unknown({self.level})"
        return self.status.value.capitalize()


def derivable(program: Program, f: Fact, config: ChaseConfig = ChaseConfig(),
              chase_result: Optional[ChaseResult] = None) -> Derivability:
    """Decide ``f`` by chase membership.

    Pass a precomputed ``chase_result`` (for the same program and config) to
    check many facts against one chase.
    """
    if not isinstance(f, Fact):
        raise ValueError(f"{f} is not a ground fact")
    result = chase_result if chase_result is not None else run_chase(program, config)
    if f in result.instance:
        return Derivability(Status.PROVEN)
    if result.terminated:
        return Derivability(Status.REFUTED)
    return Derivability(Status.UNKNOWN, result.levels_run)
