"""Bag-set evaluation of UCQs.

A tuple's multiplicity is the number of satisfying groundings that produce
it. Answers are restricted to constants of a designated answer domain (the
original instance), so labeled nulls can bind existential variables but never
show up in an answer.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from typing import Dict, Iterator, Optional, Sequence, Set

from .chase import ChaseConfig, ChaseResult, run_chase
from .model import (
    AnswerBag,
    Constant,
    ConjunctiveDisjunct,
    Grounding,
    Instance,
    UCQ,
    Variable,
    adom,
)
from .textio import Program


class EvalMode(enum.Enum):
    """How groundings are scoped in a multi-disjunct query.

    PER_DISJUNCT counts each disjunct's groundings over its own variables and
    adds the counts (UNION ALL). WHOLE_QUERY grounds all of Var(q) and counts
    a grounding once if any disjunct holds under it.
    """

    PER_DISJUNCT = "per-disjunct"
    WHOLE_QUERY = "whole-query"


class SchemaMismatch(ValueError):
    pass


def _match(atoms, rows, binding: Dict[Variable, object]) -> Iterator[Dict[Variable, object]]:
    """Backtracking join, most-bound atom first."""
    if not atoms:
        yield dict(binding)
        return

    def bound(atom):
        return sum(1 for t in atom.args if not isinstance(t, Variable) or t in binding)

    best = max(range(len(atoms)), key=lambda i: (bound(atoms[i]), -i))
    atom = atoms[best]
    rest = atoms[:best] + atoms[best + 1:]
    for row in rows.get(atom.relation.name, ()):
        added = []
        ok = True
        for t, v in zip(atom.args, row):
            if isinstance(t, Variable):
                cur = binding.get(t)
                if cur is None:
                    binding[t] = v
                    added.append(t)
                elif cur != v:
                    ok = False
                    break
            elif t != v:
                ok = False
                break
        if ok:
            yield from _match(rest, rows, binding)
        for t in added:
            del binding[t]


def grounding_tuples(d: ConjunctiveDisjunct, inst: Instance,
                     order: Optional[Sequence[Variable]] = None) -> Set[tuple]:
    """Satisfying groundings of ``d`` as value tuples in ``order``."""
    order = tuple(d.variables if order is None else order)
    return {tuple(b[v] for v in order) for b in _match(list(d.atoms), inst.rows, {})}


def satisfying_groundings(d: ConjunctiveDisjunct, inst: Instance) -> Set[Grounding]:
    """All groundings of ``d``'s variables under which every atom is a fact of ``inst``."""
    order = d.variables
    return {Grounding(tuple(zip(order, vals))) for vals in grounding_tuples(d, inst, order)}


def whole_query_groundings(all_vars: Sequence[Variable], per_disjunct, domain) -> Set[tuple]:
    """Extend each disjunct's groundings to ``all_vars`` over ``domain`` and union them."""
    all_vars = tuple(all_vars)
    out = set()
    for dvars, tuples in per_disjunct:
        pos = {v: i for i, v in enumerate(dvars)}
        free = [v for v in all_vars if v not in pos]
        for vals in tuples:
            for extra in itertools.product(domain, repeat=len(free)):
                fill = dict(zip(free, extra))
                out.add(tuple(vals[pos[v]] if v in pos else fill[v] for v in all_vars))
    return out


def count_answers(head_vars, all_vars, per_disjunct, domain, allowed, mode: EvalMode,
                  lower_bound_level=None) -> AnswerBag:
    """Fold grounding sets into an answer bag.

    ``per_disjunct`` is a list of ``(variables, set of value tuples)``;
    ``allowed`` is the set of values an answer may contain.
    """
    counts = Counter()
    if mode is EvalMode.PER_DISJUNCT:
        for dvars, tuples in per_disjunct:
            pos = [list(dvars).index(v) for v in head_vars]
            for vals in tuples:
                key = tuple(vals[p] for p in pos)
                if all(t in allowed for t in key):
                    counts[key] += 1
    else:
        all_vars = tuple(all_vars)
        pos = [all_vars.index(v) for v in head_vars]
        for vals in whole_query_groundings(all_vars, per_disjunct, domain):
            key = tuple(vals[p] for p in pos)
            if all(t in allowed for t in key):
                counts[key] += 1
    return AnswerBag.from_counts(counts, len(head_vars), lower_bound_level)


def _check_schema(q: UCQ, inst: Instance):
    for rel in q.relations:
        if rel not in inst.schema:
            raise SchemaMismatch(f"schema mismatch: query uses {rel}, absent from the instance schema")


def answer_constants(answer_domain: Instance) -> frozenset:
    return frozenset(t for t in adom(answer_domain) if isinstance(t, Constant))


def evaluate_cq_bag(q: UCQ, inst: Instance, answer_domain: Optional[Instance] = None,
                    mode: EvalMode = EvalMode.PER_DISJUNCT,
                    lower_bound_level: Optional[int] = None) -> AnswerBag:
    """Bag-set answers of ``q`` over ``inst``, keys restricted to ``answer_domain``'s constants."""
    _check_schema(q, inst)
    if answer_domain is None:
        answer_domain = inst
    per_disjunct = [(d.variables, grounding_tuples(d, inst)) for d in q.disjuncts]
    return count_answers(
        q.head_vars,
        q.variables,
        per_disjunct,
        adom(inst),
        answer_constants(answer_domain),
        mode,
        lower_bound_level,
    )


def evaluate_certain_bag(q: UCQ, program: Program, config: ChaseConfig = ChaseConfig(),
                         mode: EvalMode = EvalMode.PER_DISJUNCT,
                         chase_result: Optional[ChaseResult] = None) -> AnswerBag:
    """Bag-set certain answers: evaluate over the chase, answer over the input instance.

    A chase stopped at its level cap gives a lower-bound bag.
    """
    _check_schema(q, program.instance)
    result = chase_result if chase_result is not None else run_chase(program, config)
    level = None if result.terminated else result.levels_run
    return evaluate_cq_bag(q, result.instance, program.instance, mode, level)
