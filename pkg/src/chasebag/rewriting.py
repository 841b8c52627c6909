"""Compile dependencies into a UCQ so that plain evaluation over the input
instance yields certain answers.

Rewriting runs backwards through the chase rules: an atom over a dependency's
target is replaced by the corresponding source atom. A TGD step is only
sound when the atom's existential positions hold variables nobody else looks
at, and a reduction step (unifying two atoms) is what frees such variables
when they are shared.

Every rewritten disjunct is kept as a :class:`Branch` that remembers which
original disjunct it came from and where each original variable went. Bag
evaluation counts distinct groundings of the original variables instead of
adding up rewritten disjuncts. That keeps multiplicities aligned with the
chase for inclusion dependencies, where the same fact may be reachable along
several rewriting paths.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .evaluation import (
    EvalMode,
    _check_schema,
    answer_constants,
    count_answers,
    grounding_tuples,
)
from .model import (
    AnswerBag,
    Atom,
    ConjunctiveDisjunct,
    Constant,
    Dependency,
    DepKind,
    UCQ,
    Variable,
    adom,
)
from .textio import Program

# above this many atom arrangements canonicalization falls back to one ordering
_MAX_ARRANGEMENTS = 40320


class NotUnifiable(ValueError):
    pass


class _Dropped:
    """Value of an original variable whose witness was compiled away by a TGD step."""

    __slots__ = ()

    def __repr__(self):
        return "DROPPED"


DROPPED = _Dropped()


def _atoms_of(disjunct) -> Tuple[Atom, ...]:
    if isinstance(disjunct, ConjunctiveDisjunct):
        return disjunct.atoms
    return tuple(disjunct)


def dep_applicable_to_atom(dep: Dependency, atom: Atom, disjunct, head_vars) -> bool:
    """Can ``atom`` be rewritten backwards through ``dep``?

    IDs apply to any atom over their target. A TGD additionally needs every
    existential position to hold a non-head variable occurring exactly once
    in the whole disjunct.
    """
    if atom.relation != dep.target:
        return False
    if dep.kind is DepKind.ID:
        return True
    head = set(head_vars)
    occurrences = [t for a in _atoms_of(disjunct) for t in a.args]
    for t in atom.args[len(dep.frontier):]:
        if not isinstance(t, Variable) or t in head or occurrences.count(t) != 1:
            return False
    return True


def _fresh_names(avoid, n):
    taken = {v.name for v in avoid}
    out = []
    if n == 0:
        return out
    for k in itertools.count():
        name = f"_f{k}"
        if name not in taken:
            out.append(Variable(name))
            taken.add(name)
            if len(out) == n:
                return out


def rewrite_atom(dep: Dependency, atom: Atom, avoid=()) -> Atom:
    """Replace a target atom by the source atom it could have been derived from.

    For TGDs whose head does not copy every body position, the uncopied
    positions get fresh variables not in ``avoid``.
    """
    if atom.relation != dep.target:
        raise ValueError(f"{atom} is not over {dep.target.name}")
    if dep.kind is DepKind.ID:
        return Atom(dep.source, atom.args)
    k = len(dep.frontier)
    if not all(isinstance(t, Variable) for t in atom.args[k:]):
        raise ValueError(f"{atom}: existential positions must hold variables")
    carried = dict(zip(dep.frontier, atom.args[:k]))
    missing = [p for p in range(dep.source.arity) if p not in carried]
    fresh = iter(_fresh_names(set(avoid) | set(atom.variables), len(missing)))
    args = tuple(carried[p] if p in carried else next(fresh) for p in range(dep.source.arity))
    return Atom(dep.source, args)


def _mgu(a: Atom, b: Atom, rigid=frozenset(), preferred=frozenset()) -> Dict[Variable, object]:
    """Most general unifier of two flat atoms.

    ``rigid`` variables behave as constants. When two flexible variables meet,
    the one in ``preferred`` survives, otherwise the one from ``a``.
    """
    if a.relation != b.relation:
        raise NotUnifiable(f"{a} and {b} use different relations")
    parent: Dict[object, object] = {}

    def find(t):
        while t in parent:
            t = parent[t]
        return t

    def rank(t):
        if not isinstance(t, Variable) or t in rigid:
            return 0
        return 1 if t in preferred else 2

    for s, t in zip(a.args, b.args):
        s, t = find(s), find(t)
        if s == t:
            continue
        rs, rt = rank(s), rank(t)
        if rs == 0 and rt == 0:
            raise NotUnifiable(f"cannot unify {s} with {t}")
        if rt >= rs:
            parent[t] = s
        else:
            parent[s] = t
    return {v: find(v) for v in parent}


def _substitute(atoms, sub) -> Tuple[Atom, ...]:
    out = [Atom(a.relation, tuple(sub.get(t, t) for t in a.args)) for a in atoms]
    return tuple(dict.fromkeys(out))


def reduce_step(disjunct, i: int, j: int, head_vars) -> ConjunctiveDisjunct:
    """Unify atoms ``i`` and ``j`` across the disjunct, head variables held fixed.

    Raises :class:`NotUnifiable` when no unifier exists.
    """
    atoms = _atoms_of(disjunct)
    sub = _mgu(atoms[i], atoms[j], rigid=frozenset(head_vars))
    return ConjunctiveDisjunct(_substitute(atoms, sub))


# ---------------------------------------------------------------------------
# Canonical forms


def _shape(atom: Atom, fixed):
    return (
        atom.relation.name,
        tuple(
            ("v",) if isinstance(t, Variable) and t not in fixed
            else (("h", t.name) if isinstance(t, Variable) else ("c", t.name))
            for t in atom.args
        ),
    )


def _arrangements(atoms, fixed):
    groups = {}
    for a in atoms:
        groups.setdefault(_shape(a, fixed), []).append(a)
    ordered = [groups[k] for k in sorted(groups)]
    if math.prod(math.factorial(len(g)) for g in ordered) > _MAX_ARRANGEMENTS:
        yield [a for g in ordered for a in g]
        return
    for combo in itertools.product(*(itertools.permutations(g) for g in ordered)):
        yield [a for g in combo for a in g]


def _encode(t, names, fixed):
    if isinstance(t, Constant):
        return ("c", t.name)
    if t in fixed:
        return ("h", t.name)
    if t not in names:
        names[t] = len(names)
    return ("v", names[t])


def _canonical(atoms, fixed=frozenset(), binding=()):
    """Key invariant under atom reordering and renaming of non-fixed variables."""
    atoms = tuple(dict.fromkeys(atoms))
    best = None
    for arrangement in _arrangements(atoms, fixed):
        names = {}
        enc = tuple(
            (a.relation.name, tuple(_encode(t, names, fixed) for t in a.args)) for a in arrangement
        )
        benc = tuple(
            (v.name, ("x",) if t is None else _encode(t, names, fixed)) for v, t in binding
        )
        key = (enc, benc)
        if best is None or key < best:
            best = key
    return best


def canonical_form(disjunct, head_vars=()) -> tuple:
    return _canonical(_atoms_of(disjunct), frozenset(head_vars))[0]


def canonical_query(q: UCQ):
    """Order-free key of a UCQ: the sorted canonical forms of its disjuncts."""
    return (len(q.head_vars), tuple(sorted(canonical_form(d, q.head_vars) for d in q.disjuncts)))


# ---------------------------------------------------------------------------
# Saturation


@dataclass(frozen=True)
class Branch:
    """A rewritten disjunct together with its provenance.

    ``binding`` maps each variable of original disjunct ``source`` to a term of
    ``atoms``, or to ``None`` once a TGD step has compiled its witness away.
    """

    atoms: Tuple[Atom, ...]
    source: int
    binding: Tuple[Tuple[Variable, object], ...]
    via_tgd: bool

    @property
    def disjunct(self) -> ConjunctiveDisjunct:
        return ConjunctiveDisjunct(self.atoms)

    def head_terms(self, head_vars) -> tuple:
        b = dict(self.binding)
        return tuple(b[v] for v in head_vars)

    def resolve(self, values: Dict[Variable, object]) -> tuple:
        out = []
        for _, t in self.binding:
            if t is None:
                out.append(DROPPED)
            elif isinstance(t, Variable):
                out.append(values[t])
            else:
                out.append(t)
        return tuple(out)


@dataclass(frozen=True)
class RewriteResult:
    """``query`` holds the rewritten disjuncts expressible under the original
    head; ``specialised`` holds those whose reduction equated head variables
    with each other or with constants, as ``(head terms, disjunct)`` pairs."""

    query: UCQ
    iterations: int
    disjuncts_generated: int
    branches: Tuple[Branch, ...] = ()
    specialised: Tuple[Tuple[tuple, ConjunctiveDisjunct], ...] = ()

    def render(self) -> str:
        lines = [self.query.render()]
        for head, d in self.specialised:
            terms = ",".join(t.render(in_query=True) if isinstance(t, Constant) else str(t) for t in head)
            lines.append(f"# specialised head: {self.query.name}({terms}) <- {d}.")
        return "\n".join(lines) + "\n"


def perfect_rewrite(q: UCQ, deps: Sequence[Dependency]) -> RewriteResult:
    deps = tuple(deps)
    tgd_targets = {d.target for d in deps if d.is_tgd}
    seen: Dict[tuple, int] = {}
    branches: List[Branch] = []

    def add(atoms, source, binding, via_tgd) -> bool:
        atoms = tuple(dict.fromkeys(atoms))
        key = (source, _canonical(atoms, frozenset(), binding))
        at = seen.get(key)
        if at is not None:
            if branches[at].via_tgd and not via_tgd:
                branches[at] = Branch(branches[at].atoms, source, branches[at].binding, False)
            return False
        seen[key] = len(branches)
        branches.append(Branch(atoms, source, tuple(binding), via_tgd))
        return True

    for i, d in enumerate(q.disjuncts):
        add(d.atoms, i, [(v, v) for v in d.variables], False)

    frontier = deque(range(len(branches)))
    generated = 0
    iterations = 0
    while frontier:
        next_frontier = deque()
        for bi in frontier:
            b = branches[bi]
            atoms = b.atoms
            heads = {t for t in b.head_terms(q.head_vars) if isinstance(t, Variable)}
            used = {v for a in atoms for v in a.variables}
            for ai, atom in enumerate(atoms):
                for dep in deps:
                    if not dep_applicable_to_atom(dep, atom, atoms, heads):
                        continue
                    new_atom = rewrite_atom(dep, atom, avoid=used)
                    new_atoms = atoms[:ai] + (new_atom,) + atoms[ai + 1:]
                    remaining = {v for a in new_atoms for v in a.variables}
                    binding = [
                        (v, t if not isinstance(t, Variable) or t in remaining else None)
                        for v, t in b.binding
                    ]
                    if add(new_atoms, b.source, binding, b.via_tgd or dep.is_tgd):
                        next_frontier.append(len(branches) - 1)
            for ai, aj in itertools.combinations(range(len(atoms)), 2):
                if atoms[ai].relation != atoms[aj].relation or atoms[ai].relation not in tgd_targets:
                    continue
                try:
                    sub = _mgu(atoms[ai], atoms[aj], preferred=frozenset(heads))
                except NotUnifiable:
                    continue
                new_atoms = _substitute(atoms, sub)
                binding = [(v, t if t is None else sub.get(t, t)) for v, t in b.binding]
                if add(new_atoms, b.source, binding, b.via_tgd):
                    next_frontier.append(len(branches) - 1)
        if next_frontier:
            iterations += 1
            generated += len(next_frontier)
        frontier = next_frontier

    disjuncts = []
    specialised = []
    printed = set()
    for b in branches:
        head = b.head_terms(q.head_vars)
        if head == q.head_vars:
            key = _canonical(b.atoms, frozenset(q.head_vars))[0]
            if key not in printed:
                printed.add(key)
                disjuncts.append(ConjunctiveDisjunct(b.atoms))
        else:
            entry = (head, ConjunctiveDisjunct(b.atoms))
            if entry not in specialised:
                specialised.append(entry)
    query = UCQ(q.name, q.head_vars, tuple(disjuncts))
    return RewriteResult(query, iterations, generated, tuple(branches), tuple(specialised))


def _source_groundings(q: UCQ, rr: RewriteResult, inst) -> List[Tuple[tuple, set]]:
    per_source = [set() for _ in q.disjuncts]
    for b in rr.branches:
        d = b.disjunct
        order = d.variables
        for vals in grounding_tuples(d, inst, order):
            per_source[b.source].add(b.resolve(dict(zip(order, vals))))
    return [(d.variables, per_source[i]) for i, d in enumerate(q.disjuncts)]


def evaluate_via_rewriting(q: UCQ, program: Program, mode: EvalMode = EvalMode.PER_DISJUNCT,
                           rewriting: Optional[RewriteResult] = None) -> AnswerBag:
    """Answer ``q`` over the input instance alone, with the dependencies compiled in."""
    inst = program.instance
    _check_schema(q, inst)
    rr = rewriting if rewriting is not None else perfect_rewrite(q, program.dependencies)
    return count_answers(
        q.head_vars,
        q.variables,
        _source_groundings(q, rr, inst),
        adom(inst),
        answer_constants(inst),
        mode,
    )


def answer_provenance(q: UCQ, program: Program, rewriting: Optional[RewriteResult] = None):
    """Map each answer tuple to the branches that produce it (per-disjunct scope)."""
    inst = program.instance
    rr = rewriting if rewriting is not None else perfect_rewrite(q, program.dependencies)
    allowed = answer_constants(inst)
    out: Dict[tuple, List[Branch]] = {}
    for b in rr.branches:
        d = b.disjunct
        order = d.variables
        hit = set()
        for vals in grounding_tuples(d, inst, order):
            values = dict(zip(order, vals))
            key = tuple(values[t] if isinstance(t, Variable) else t for t in b.head_terms(q.head_vars))
            if all(t in allowed for t in key):
                hit.add(key)
        for key in hit:
            out.setdefault(key, []).append(b)
    return out
