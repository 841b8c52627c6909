"""Shared domain types: terms, schemas, facts, instances, dependencies, queries,
groundings and answer bags.

Every type here is immutable after construction.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union

IDENT_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_-]*\Z")
NUMBER_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")


class GroundingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Constant:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("constant names must be nonempty strings")

    @property
    def sort_key(self):
        return (0, self.name, 0)

    def render(self, in_query: bool = False) -> str:
        """Source-syntax spelling.

        Inside queries bare identifiers denote variables, so only numeric
        constants stay unquoted there.
        """
        if NUMBER_RE.match(self.name):
            return self.name
        if not in_query and IDENT_RE.match(self.name):
            return self.name
        return json.dumps(self.name, ensure_ascii=False)

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class LabeledNull:
    """A value invented by a TGD firing; never part of user input."""

    id: int

    def __post_init__(self):
        if not isinstance(self.id, int) or self.id < 0:
            raise ValueError("labeled null ids are nonnegative integers")

    @property
    def sort_key(self):
        return (1, "", self.id)

    def __str__(self):
        return f"_:n{self.id}"


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("variable names must be nonempty strings")

    @property
    def sort_key(self):
        return (2, self.name, 0)

    def __str__(self):
        return self.name


Term = Union[Constant, LabeledNull, Variable]
GroundTerm = Union[Constant, LabeledNull]


def term_key(t: Term):
    return t.sort_key


def is_ground(t) -> bool:
    return isinstance(t, (Constant, LabeledNull))


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class RelationSymbol:
    name: str
    arity: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("relation names must be nonempty")
        if not isinstance(self.arity, int) or self.arity < 1:
            raise ValueError(f"relation {self.name}: arity must be a positive integer")

    def __str__(self):
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True)
class Schema:
    relations: Tuple[RelationSymbol, ...] = ()
    _by_name: Dict[str, RelationSymbol] = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        rels = tuple(self.relations)
        by_name = {}
        for r in rels:
            if r.name in by_name:
                raise ValueError(f"duplicate relation {r.name}")
            by_name[r.name] = r
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "_by_name", by_name)

    def __contains__(self, rel) -> bool:
        if isinstance(rel, RelationSymbol):
            return self._by_name.get(rel.name) == rel
        return rel in self._by_name

    def __iter__(self) -> Iterator[RelationSymbol]:
        return iter(self.relations)

    def __len__(self):
        return len(self.relations)

    def get(self, name: str) -> Optional[RelationSymbol]:
        return self._by_name.get(name)

    def __getitem__(self, name: str) -> RelationSymbol:
        return self._by_name[name]


# ---------------------------------------------------------------------------
# Atoms and facts


def _render_args(args, in_query=False) -> str:
    parts = []
    for t in args:
        if isinstance(t, Constant):
            parts.append(t.render(in_query))
        else:
            parts.append(str(t))
    return ",".join(parts)


@dataclass(frozen=True)
class Fact:
    """Ground relational atom. Labeled nulls are allowed, variables are not."""

    relation: RelationSymbol
    args: Tuple[GroundTerm, ...]

    def __post_init__(self):
        args = tuple(self.args)
        object.__setattr__(self, "args", args)
        if len(args) != self.relation.arity:
            raise ValueError(
                f"arity mismatch: {self.relation.name} expects {self.relation.arity} "
                f"arguments, got {len(args)}"
            )
        for t in args:
            if not is_ground(t):
                raise ValueError(f"fact {self.relation.name} has non-ground argument {t!r}")

    @property
    def sort_key(self):
        return (self.relation.name, tuple(t.sort_key for t in self.args))

    def has_nulls(self) -> bool:
        return any(isinstance(t, LabeledNull) for t in self.args)

    def __str__(self):
        return f"{self.relation.name}({_render_args(self.args)})"


@dataclass(frozen=True)
class Atom:
    """Query atom; arguments are variables or constants."""

    relation: RelationSymbol
    args: Tuple[Union[Variable, Constant], ...]

    def __post_init__(self):
        args = tuple(self.args)
        object.__setattr__(self, "args", args)
        if len(args) != self.relation.arity:
            raise ValueError(
                f"arity mismatch: {self.relation.name} expects {self.relation.arity} "
                f"arguments, got {len(args)}"
            )
        for t in args:
            if not isinstance(t, (Variable, Constant)):
                raise ValueError(f"query atoms take variables or constants, got {t!r}")

    @property
    def variables(self) -> Tuple[Variable, ...]:
        return tuple(dict.fromkeys(t for t in self.args if isinstance(t, Variable)))

    def __str__(self):
        return f"{self.relation.name}({_render_args(self.args, in_query=True)})"


class Instance:
    """Finite set of facts over a schema.

    Insertion order is remembered (the chase seeds its queue from it) but
    equality is set equality.
    """

    def __init__(self, schema: Schema, facts: Iterable[Fact] = ()):
        unique = tuple(dict.fromkeys(facts))
        for f in unique:
            if f.relation not in schema:
                raise ValueError(f"relation {f.relation} is not in the schema")
        self.schema = schema
        self.facts = unique
        self._set = frozenset(unique)

    def __contains__(self, f) -> bool:
        return f in self._set

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.facts)

    def __len__(self):
        return len(self.facts)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.schema == other.schema and self._set == other._set

    def __hash__(self):
        return hash(self._set)

    def __repr__(self):
        return f"Instance({len(self.facts)} facts)"

    @property
    def fact_set(self) -> frozenset:
        return self._set

    @cached_property
    def rows(self) -> Dict[str, Tuple[Tuple[GroundTerm, ...], ...]]:
        """Argument tuples grouped by relation name."""
        out: Dict[str, list] = {}
        for f in self.facts:
            out.setdefault(f.relation.name, []).append(f.args)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def active_domain(self) -> Tuple[GroundTerm, ...]:
        seen = {t for f in self.facts for t in f.args}
        return tuple(sorted(seen, key=term_key))

    def with_facts(self, facts: Iterable[Fact]) -> "Instance":
        return Instance(self.schema, list(self.facts) + list(facts))


def adom(instance: Instance) -> Tuple[GroundTerm, ...]:
    """Active domain: the ground terms occurring in the instance, constants
    first (by name) then nulls (by id)."""
    return instance.active_domain


# ---------------------------------------------------------------------------
# Dependencies


class DepKind(enum.Enum):
    ID = "ID"
    TGD = "TGD"


@dataclass(frozen=True)
class Dependency:
    """Single-atom-body dependency ``source(x) -> exists y. target(x', y)``.

    ``frontier`` lists, in head order, the body positions copied into the head
    before the existential positions. For the inclusion and prefix TGD forms it
    is simply ``0..source.arity-1``; the general form only exists for TGDs.
    """

    kind: DepKind
    source: RelationSymbol
    target: RelationSymbol
    n_existential: int = 0
    frontier: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        identity = tuple(range(self.source.arity))
        frontier = identity if self.frontier is None else tuple(self.frontier)
        object.__setattr__(self, "frontier", frontier)
        if self.kind is DepKind.ID:
            if self.n_existential != 0:
                raise ValueError("inclusion dependencies have no existential variables")
            if self.source.arity != self.target.arity or frontier != identity:
                raise ValueError("unsupported dependency form")
        else:
            if self.n_existential < 1:
                raise ValueError("a TGD needs at least one existential variable")
            if len(set(frontier)) != len(frontier) or any(
                not 0 <= p < self.source.arity for p in frontier
            ):
                raise ValueError("unsupported dependency form")
            if self.target.arity != len(frontier) + self.n_existential:
                raise ValueError("unsupported dependency form")

    @classmethod
    def inclusion(cls, source: RelationSymbol, target: RelationSymbol) -> "Dependency":
        return cls(DepKind.ID, source, target, 0)

    @classmethod
    def tgd(cls, source, target, n_existential=None, frontier=None) -> "Dependency":
        if n_existential is None:
            width = source.arity if frontier is None else len(frontier)
            n_existential = target.arity - width
        return cls(DepKind.TGD, source, target, n_existential, frontier)

    @property
    def is_tgd(self) -> bool:
        return self.kind is DepKind.TGD

    @property
    def is_prefix_form(self) -> bool:
        return self.frontier == tuple(range(self.source.arity))

    def render(self) -> str:
        body = [f"x{i + 1}" for i in range(self.source.arity)]
        ex = [f"y{i + 1}" for i in range(self.n_existential)]
        head = [body[p] for p in self.frontier] + ex
        quant = f"exists {','.join(ex)}: " if ex else ""
        return (
            f"{self.source.name}({','.join(body)}) -> "
            f"{quant}{self.target.name}({','.join(head)})."
        )

    def __str__(self):
        return self.render()[:-1]


# ---------------------------------------------------------------------------
# Queries


@dataclass(frozen=True)
class ConjunctiveDisjunct:
    atoms: Tuple[Atom, ...]

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a disjunct needs at least one atom")
        object.__setattr__(self, "atoms", atoms)

    @property
    def variables(self) -> Tuple[Variable, ...]:
        """Variables in first-occurrence order."""
        return tuple(dict.fromkeys(v for a in self.atoms for v in a.variables))

    def __str__(self):
        return ", ".join(str(a) for a in self.atoms)


@dataclass(frozen=True)
class UCQ:
    name: str
    head_vars: Tuple[Variable, ...]
    disjuncts: Tuple[ConjunctiveDisjunct, ...]

    def __post_init__(self):
        head = tuple(self.head_vars)
        disjuncts = tuple(self.disjuncts)
        object.__setattr__(self, "head_vars", head)
        object.__setattr__(self, "disjuncts", disjuncts)
        if not disjuncts:
            raise ValueError("a query needs at least one disjunct")
        for v in head:
            if not isinstance(v, Variable):
                raise ValueError(f"head arguments must be variables, got {v!r}")
        for i, d in enumerate(disjuncts):
            present = set(d.variables)
            for v in head:
                if v not in present:
                    raise ValueError(
                        f"unsafe head variable {v.name}: it does not occur in disjunct {i + 1}"
                    )

    @property
    def arity(self) -> int:
        return len(self.head_vars)

    @property
    def variables(self) -> Tuple[Variable, ...]:
        """Var(q): head variables, then every disjunct's in order."""
        out = dict.fromkeys(self.head_vars)
        for d in self.disjuncts:
            out.update(dict.fromkeys(d.variables))
        return tuple(out)

    @property
    def relations(self):
        return {a.relation for d in self.disjuncts for a in d.atoms}

    def render(self) -> str:
        head = ",".join(v.name for v in self.head_vars)
        body = " | ".join(str(d) for d in self.disjuncts)
        return f"{self.name}({head}) <- {body}."

    def __str__(self):
        return self.render()


# ---------------------------------------------------------------------------
# Groundings


@dataclass(frozen=True)
class Grounding:
    """Total map from a declared variable set to ground terms."""

    pairs: Tuple[Tuple[Variable, GroundTerm], ...]

    def __post_init__(self):
        pairs = tuple(sorted(self.pairs, key=lambda p: p[0].name))
        names = [v.name for v, _ in pairs]
        if len(set(names)) != len(names):
            raise ValueError("a grounding binds each variable once")
        for v, t in pairs:
            if not isinstance(v, Variable) or not is_ground(t):
                raise ValueError(f"bad grounding pair {v!r} -> {t!r}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def of(cls, mapping: Mapping[Variable, GroundTerm]) -> "Grounding":
        return cls(tuple(mapping.items()))

    @property
    def domain(self) -> frozenset:
        return frozenset(v for v, _ in self.pairs)

    def as_dict(self) -> Dict[Variable, GroundTerm]:
        return dict(self.pairs)

    def __getitem__(self, v: Variable) -> GroundTerm:
        for k, t in self.pairs:
            if k == v:
                return t
        raise KeyError(v)

    def __str__(self):
        return "{" + ", ".join(f"{v}->{t}" for v, t in self.pairs) + "}"


def apply_grounding(atoms, g) -> list:
    """Ground a disjunct (or an atom list) under ``g``.

    Already-ground facts pass through unchanged, so re-applying a grounding
    is a no-op.
    """
    if isinstance(atoms, ConjunctiveDisjunct):
        atoms = atoms.atoms
    mapping = g.as_dict() if isinstance(g, Grounding) else dict(g)
    out = []
    for a in atoms:
        if isinstance(a, Fact):
            out.append(a)
            continue
        args = []
        for t in a.args:
            if isinstance(t, Variable):
                if t not in mapping:
                    raise GroundingError(f"incomplete grounding: {t.name} is unbound")
                args.append(mapping[t])
            else:
                args.append(t)
        out.append(Fact(a.relation, tuple(args)))
    return out


# ---------------------------------------------------------------------------
# Answer bags


@dataclass(frozen=True, eq=False)
class AnswerBag:
    """Multiset of answer tuples.

    ``lower_bound_level`` is ``None`` for exact bags; otherwise every
    multiplicity is only known to be a lower bound, established by a chase
    capped at that level.
    """

    entries: Mapping[Tuple[Constant, ...], int]
    arity: int
    lower_bound_level: Optional[int] = None

    def __post_init__(self):
        entries = dict(self.entries)
        for key, m in entries.items():
            if len(key) != self.arity:
                raise ValueError(f"answer {key} does not have arity {self.arity}")
            if not all(isinstance(t, Constant) for t in key):
                raise ValueError(f"answer {key} contains a non-constant term")
            if not isinstance(m, int) or m < 1:
                raise ValueError(f"answer {key} has multiplicity {m}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_counts(cls, counts, arity, lower_bound_level=None) -> "AnswerBag":
        return cls({k: m for k, m in counts.items() if m}, arity, lower_bound_level)

    @property
    def exact(self) -> bool:
        return self.lower_bound_level is None

    def __getitem__(self, key) -> int:
        return self.entries.get(tuple(key), 0)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, AnswerBag):
            return NotImplemented
        return (
            self.arity == other.arity
            and self.entries == other.entries
            and self.lower_bound_level == other.lower_bound_level
        )

    def keys(self) -> list:
        return sorted(self.entries, key=lambda k: tuple(t.sort_key for t in k))

    def items(self) -> list:
        return [(k, self.entries[k]) for k in self.keys()]

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def same_counts(self, other: "AnswerBag") -> bool:
        return self.arity == other.arity and self.entries == other.entries


def make_tuple(*names: str) -> Tuple[Constant, ...]:
    return tuple(Constant(n) for n in names)


def variables(*names: str) -> Tuple[Variable, ...]:
    return tuple(Variable(n) for n in names)
