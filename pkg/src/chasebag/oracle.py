"""Brute-force reference evaluators.

Deliberately naive: full enumeration of groundings and iterative-deepening
search for derivations. Nothing here touches the join code in
:mod:`chasebag.evaluation`; fact membership is decided through
:func:`chasebag.chase.derivable`.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .chase import ChaseConfig, ChaseResult, Status, derivable, run_chase
from .evaluation import EvalMode
from .model import (
    AnswerBag,
    Constant,
    DepKind,
    Fact,
    Grounding,
    LabeledNull,
    UCQ,
    adom,
    apply_grounding,
)
from .textio import Program

MAX_VARIABLES = 8
MAX_DOMAIN = 10


class OracleScaleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Divergence:
    tuple: Tuple[Constant, ...]
    lhs: int
    rhs: int
    context: str = ""

    def __post_init__(self):
        if self.lhs == self.rhs:
            raise ValueError("a divergence needs differing multiplicities")

    def render(self) -> str:
        vals = ",".join(t.name for t in self.tuple)
        prefix = f"{self.context}: " if self.context else ""
        return f"{prefix}({vals}) {self.lhs} != {self.rhs}"


def diff_bags(b1: AnswerBag, b2: AnswerBag, context: str = "") -> List[Divergence]:
    if b1.arity != b2.arity:
        raise ValueError(f"arity mismatch: {b1.arity} vs {b2.arity}")
    keys = set(b1.entries) | set(b2.entries)
    out = [Divergence(k, b1[k], b2[k], context) for k in keys if b1[k] != b2[k]]
    return sorted(out, key=lambda d: tuple(t.sort_key for t in d.tuple))


class _Membership:
    def __init__(self, program, config, result):
        self.program = program
        self.config = config
        self.result = result
        self.cache: Dict[Fact, bool] = {}

    def __call__(self, f: Fact) -> bool:
        hit = self.cache.get(f)
        if hit is None:
            hit = derivable(self.program, f, self.config, self.result).status is Status.PROVEN
            self.cache[f] = hit
        return hit


def _setup(q: UCQ, program: Program, config: ChaseConfig, mode: EvalMode):
    result = run_chase(program, config)
    domain = adom(result.instance)
    if len(domain) > MAX_DOMAIN:
        raise OracleScaleError(f"oracle scale exceeded: {len(domain)} domain values (max {MAX_DOMAIN})")
    widths = [len(q.variables)] if mode is EvalMode.WHOLE_QUERY else [len(d.variables) for d in q.disjuncts]
    if max(widths) > MAX_VARIABLES:
        raise OracleScaleError(f"oracle scale exceeded: {max(widths)} variables (max {MAX_VARIABLES})")
    return result, domain, _Membership(program, config, result)


def _holds(atoms, mapping, member) -> bool:
    return all(member(f) for f in apply_grounding(atoms, mapping))


def brute_force_groundings(q: UCQ, program: Program, config: ChaseConfig = ChaseConfig()):
    """Per disjunct, every grounding into adom(chase) whose atoms are all derivable."""
    result, domain, member = _setup(q, program, config, EvalMode.PER_DISJUNCT)
    out = []
    for d in q.disjuncts:
        vs = d.variables
        found = set()
        for combo in itertools.product(domain, repeat=len(vs)):
            mapping = dict(zip(vs, combo))
            if _holds(d.atoms, mapping, member):
                found.add(Grounding(tuple(mapping.items())))
        out.append(found)
    return out


def brute_force_certain_bag(q: UCQ, program: Program, config: ChaseConfig = ChaseConfig(),
                            mode: EvalMode = EvalMode.PER_DISJUNCT) -> AnswerBag:
    result, domain, member = _setup(q, program, config, mode)
    allowed = {t for t in adom(program.instance) if isinstance(t, Constant)}
    counts = Counter()

    def tally(mapping):
        key = tuple(mapping[v] for v in q.head_vars)
        if all(t in allowed for t in key):
            counts[key] += 1

    if mode is EvalMode.PER_DISJUNCT:
        for d in q.disjuncts:
            vs = d.variables
            for combo in itertools.product(domain, repeat=len(vs)):
                mapping = dict(zip(vs, combo))
                if _holds(d.atoms, mapping, member):
                    tally(mapping)
    else:
        vs = q.variables
        for combo in itertools.product(domain, repeat=len(vs)):
            mapping = dict(zip(vs, combo))
            if any(_holds(d.atoms, mapping, member) for d in q.disjuncts):
                tally(mapping)
    level = None if result.terminated else result.levels_run
    return AnswerBag.from_counts(counts, q.arity, level)


# ---------------------------------------------------------------------------
# Derivations


def null_origins(result: ChaseResult) -> Dict[LabeledNull, Tuple[int, Fact, int]]:
    """Which firing invented each null: ``null -> (dependency index, premise, position)``.

    Needs a chase run with ``trace=True``.
    """
    if result.trace is None:
        raise ValueError("null origins need a traced chase run")
    out = {}
    for rec in result.trace:
        for pos, t in enumerate(rec.conclusion.args):
            if isinstance(t, LabeledNull) and t not in out:
                out[t] = (rec.dependency_index, rec.premise, pos)
    return out


def _premise(j, dep, goal: Fact, origins) -> Optional[Fact]:
    if dep.kind is DepKind.ID:
        return Fact(dep.source, goal.args)
    k = len(dep.frontier)
    premise = None
    for pos in range(k, len(goal.args)):
        t = goal.args[pos]
        if not isinstance(t, LabeledNull) or origins is None:
            return None
        origin = origins.get(t)
        if origin is None or origin[0] != j or origin[2] != pos:
            return None
        if premise is not None and origin[1] != premise:
            return None
        premise = origin[1]
    if premise is None or premise.relation != dep.source:
        return None
    if tuple(premise.args[p] for p in dep.frontier) != goal.args[:k]:
        return None
    return premise


def derivation_search(program: Program, f: Fact, depth: int,
                      origins: Optional[Dict[LabeledNull, Tuple[int, Fact, int]]] = None
                      ) -> Optional[List[Fact]]:
    """Find a derivation sequence ending in ``f`` with at most ``depth`` rule steps.

    Works backwards from ``f`` with iterative deepening. A fact carrying a
    labeled null can only be concluded by the firing that invented the null,
    so TGD steps need ``origins`` (see :func:`null_origins`).
    """
    base = program.instance
    deps = program.dependencies

    def search(goal, budget, visiting):
        if goal in base:
            return [goal]
        if budget == 0:
            return None
        for j, dep in enumerate(deps):
            if dep.target != goal.relation:
                continue
            prem = _premise(j, dep, goal, origins)
            if prem is None or prem in visiting:
                continue
            sub = search(prem, budget - 1, visiting | {prem})
            if sub is not None:
                return sub + [goal]
        return None

    for budget in range(depth + 1):
        found = search(f, budget, frozenset([f]))
        if found is not None:
            return found
    return None


def verify(q: UCQ, program: Program, engine_bag: AnswerBag, config: ChaseConfig = ChaseConfig(),
           mode: EvalMode = EvalMode.PER_DISJUNCT, context: str = "engine vs oracle"):
    """Divergences between an engine-produced bag and the brute-force bag."""
    return diff_bags(engine_bag, brute_force_certain_bag(q, program, config, mode), context)
