"""Parsing and rendering for ``.idb`` programs, ``.uq`` queries and answer bags.

Program syntax::

    rel R/2.                       # relation declaration
    R(a, "two words").             # fact; bare identifiers are constants
    R(x,y) -> S(x,y).              # inclusion dependency
    S(x,y) -> exists z: T(x,y,z).  # tuple-generating dependency

Query syntax::

    q(x) <- R(x,y), S(y) | T(x, "a").

In queries bare identifiers are variables unless they start with a digit;
other constants are written as quoted strings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .model import (
    AnswerBag,
    Atom,
    ConjunctiveDisjunct,
    Constant,
    Dependency,
    Fact,
    Instance,
    RelationSymbol,
    Schema,
    UCQ,
    Variable,
)


class SourceError(Exception):
    """Syntax or well-formedness error pinned to a source position."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Program:
    """An incomplete database: schema, ground instance and dependencies."""

    schema: Schema
    instance: Instance
    dependencies: Tuple[Dependency, ...] = ()

    def __post_init__(self):
        deps = tuple(self.dependencies)
        object.__setattr__(self, "dependencies", deps)
        for d in deps:
            if d.source not in self.schema or d.target not in self.schema:
                raise ValueError(f"dependency {d} uses a relation outside the schema")
        if any(f.has_nulls() for f in self.instance):
            raise ValueError("input facts cannot contain labeled nulls")

    def render(self) -> str:
        return render_program(self)


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<null>_:)
  | (?P<arrow>->)
  | (?P<larrow><-)
  | (?P<number>-[0-9]+(?:\.[0-9]+)?|[0-9]+\.[0-9]+)
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_-]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[(),./:|])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, arrow, larrow, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise SourceError(line, col, "unterminated string")
            raise SourceError(line, col, f"unexpected character {ch!r}")
        kind = m.lastgroup
        tok = m.group()
        if kind == "null":
            raise SourceError(line, col, "null-prefixed identifier '_:' is not allowed in input")
        if kind != "ws":
            if kind == "punct":
                kind = tok
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Cursor:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        t = self.tok
        if t.kind != kind:
            found = "end of input" if t.kind == "eof" else repr(t.text)
            raise SourceError(t.line, t.column, f"expected {what or repr(kind)}, found {found}")
        return self.advance()


def _decode_string(t: Token) -> str:
    try:
        value = json.loads(t.text)
    except ValueError:
        raise SourceError(t.line, t.column, "malformed string literal") from None
    if not value:
        raise SourceError(t.line, t.column, "empty constant")
    return value


# ---------------------------------------------------------------------------
# Program parsing


def _raw_atom(cur: _Cursor):
    """NAME ( term, ... ) -> (name token, [arg tokens])."""
    name = cur.expect("ident", "relation name")
    cur.expect("(", "'('")
    args = []
    if cur.tok.kind != ")":
        while True:
            t = cur.tok
            if t.kind not in ("ident", "number", "string"):
                found = "end of input" if t.kind == "eof" else repr(t.text)
                raise SourceError(t.line, t.column, f"expected a term, found {found}")
            args.append(cur.advance())
            if cur.tok.kind == ",":
                cur.advance()
                continue
            break
    cur.expect(")", "')' or ','")
    return name, args


def _lookup(schema_map, name_tok: Token, n_args: int) -> RelationSymbol:
    rel = schema_map.get(name_tok.text)
    if rel is None:
        raise SourceError(name_tok.line, name_tok.column, f"unknown relation {name_tok.text}")
    if rel.arity != n_args:
        raise SourceError(
            name_tok.line,
            name_tok.column,
            f"arity mismatch: {rel.name} has arity {rel.arity}, used with {n_args} arguments",
        )
    return rel


def _fact_const(t: Token) -> Constant:
    if t.kind == "string":
        return Constant(_decode_string(t))
    return Constant(t.text)


def parse_program(text: str) -> Program:
    """Parse an ``.idb`` program. Raises :class:`SourceError`."""
    cur = _Cursor(tokenize(text))
    decls = []
    facts = []
    deps = []
    while cur.tok.kind != "eof":
        t = cur.tok
        if t.kind == "ident" and t.text == "rel" and cur.peek().kind == "ident":
            cur.advance()
            name = cur.advance()
            cur.expect("/", "'/'")
            ar = cur.expect("ident", "arity")
            if not ar.text.isdigit() or int(ar.text) < 1:
                raise SourceError(ar.line, ar.column, "arity must be a positive integer")
            cur.expect(".", "'.'")
            decls.append((name, int(ar.text)))
            continue
        left = _raw_atom(cur)
        if cur.tok.kind == ".":
            cur.advance()
            facts.append(left)
        elif cur.tok.kind == "arrow":
            arrow = cur.advance()
            existentials = []
            if cur.tok.kind == "ident" and cur.tok.text == "exists" and cur.peek().kind == "ident" \
                    and cur.peek(2).kind in (",", ":"):
                cur.advance()
                while True:
                    existentials.append(cur.expect("ident", "existential variable"))
                    if cur.tok.kind == ",":
                        cur.advance()
                        continue
                    break
                cur.expect(":", "':'")
            right = _raw_atom(cur)
            cur.expect(".", "'.'")
            deps.append((left, arrow, existentials, right))
        else:
            found = "end of input" if cur.tok.kind == "eof" else repr(cur.tok.text)
            raise SourceError(cur.tok.line, cur.tok.column, f"expected '.' or '->', found {found}")

    schema_map = {}
    relations = []
    for name, arity in decls:
        prev = schema_map.get(name.text)
        if prev is not None:
            if prev.arity != arity:
                raise SourceError(name.line, name.column, f"relation {name.text} redeclared with arity {arity}")
            continue
        rel = RelationSymbol(name.text, arity)
        schema_map[name.text] = rel
        relations.append(rel)
    schema = Schema(tuple(relations))

    ground = []
    for name, args in facts:
        rel = _lookup(schema_map, name, len(args))
        ground.append(Fact(rel, tuple(_fact_const(a) for a in args)))

    dependencies = [_build_dependency(schema_map, *d) for d in deps]
    return Program(schema, Instance(schema, ground), tuple(dependencies))


def _build_dependency(schema_map, left, arrow, existentials, right) -> Dependency:
    (lname, largs), (rname, rargs) = left, right
    src = _lookup(schema_map, lname, len(largs))
    dst = _lookup(schema_map, rname, len(rargs))

    def unsupported(tok=arrow, why=""):
        msg = "unsupported dependency form"
        raise SourceError(tok.line, tok.column, f"{msg}: {why}" if why else msg)

    for a in list(largs) + list(rargs) + list(existentials):
        if a.kind != "ident" or a.text[0].isdigit():
            unsupported(a, "dependencies take variables only")
    body = [a.text for a in largs]
    if len(set(body)) != len(body):
        unsupported(lname, "repeated variable in the body")
    ex = [e.text for e in existentials]
    if len(set(ex)) != len(ex) or set(ex) & set(body):
        unsupported(existentials[0] if existentials else arrow, "existential variables must be fresh and distinct")
    head = [a.text for a in rargs]
    if not ex:
        if head != body:
            unsupported(rname)
        return Dependency.inclusion(src, dst)
    k = len(head) - len(ex)
    if k < 0 or head[k:] != ex:
        unsupported(rname, "existential variables must close the head atom, in declared order")
    frontier_names = head[:k]
    if any(v not in body for v in frontier_names) or len(set(frontier_names)) != k:
        unsupported(rname)
    frontier = tuple(body.index(v) for v in frontier_names)
    return Dependency.tgd(src, dst, len(ex), frontier)


# ---------------------------------------------------------------------------
# Query parsing


def _query_term(t: Token):
    if t.kind == "string":
        return Constant(_decode_string(t))
    if t.kind == "number" or t.text[0].isdigit():
        return Constant(t.text)
    return Variable(t.text)


def parse_query(text: str, schema: Schema) -> UCQ:
    """Parse a ``.uq`` query against ``schema``. Raises :class:`SourceError`."""
    cur = _Cursor(tokenize(text))
    name = cur.expect("ident", "query name")
    cur.expect("(", "'('")
    head = []
    if cur.tok.kind != ")":
        while True:
            t = cur.tok
            if t.kind != "ident" or t.text[0].isdigit():
                found = "end of input" if t.kind == "eof" else repr(t.text)
                raise SourceError(t.line, t.column, f"expected a head variable, found {found}")
            head.append(cur.advance())
            if cur.tok.kind == ",":
                cur.advance()
                continue
            break
    cur.expect(")", "')' or ','")
    cur.expect("larrow", "'<-'")
    disjuncts = []
    starts = []
    while True:
        starts.append(cur.tok)
        atoms = []
        while True:
            rname, args = _raw_atom(cur)
            rel = _lookup(schema, rname, len(args))
            atoms.append(Atom(rel, tuple(_query_term(a) for a in args)))
            if cur.tok.kind == ",":
                cur.advance()
                continue
            break
        disjuncts.append(ConjunctiveDisjunct(tuple(atoms)))
        if cur.tok.kind == "|":
            cur.advance()
            continue
        break
    cur.expect(".", "'.'")
    if cur.tok.kind != "eof":
        raise SourceError(cur.tok.line, cur.tok.column, "trailing input after the query")

    head_vars = tuple(Variable(t.text) for t in head)
    for d, start in zip(disjuncts, starts):
        present = set(d.variables)
        for tok, v in zip(head, head_vars):
            if v not in present:
                raise SourceError(
                    start.line,
                    start.column,
                    f"unsafe head variable {v.name}: it does not occur in this disjunct",
                )
    return UCQ(name.text, head_vars, tuple(disjuncts))


# ---------------------------------------------------------------------------
# Rendering


def render_facts(facts) -> str:
    return "".join(f"{f}.\n" for f in facts)


def render_program(program: Program) -> str:
    lines = [f"rel {r.name}/{r.arity}.\n" for r in program.schema]
    out = "".join(lines) + render_facts(program.instance)
    out += "".join(d.render() + "\n" for d in program.dependencies)
    return out


def render_query(q: UCQ) -> str:
    return q.render() + "\n"


def _cell(t: Constant) -> str:
    return t.name


def render_bag(bag: AnswerBag, format: str = "table") -> str:
    """Render rows sorted by tuple as ``table``, ``csv`` or ``json`` lines."""
    rows = bag.items()
    cols = [f"col{i + 1}" for i in range(bag.arity)]
    if format == "csv":
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols + ["multiplicity"])
        for key, m in rows:
            w.writerow([_cell(t) for t in key] + [m])
        return buf.getvalue()
    if format == "json":
        out = []
        for key, m in rows:
            rec = {"tuple": [_cell(t) for t in key], "multiplicity": m, "exact": bag.exact}
            out.append(json.dumps(rec, ensure_ascii=False) + "\n")
        return "".join(out)
    if format != "table":
        raise ValueError(f"unknown format {format!r}")
    header = cols + ["multiplicity"]
    body = [[_cell(t) for t in key] + [str(m)] for key, m in rows]
    widths = [max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(header)]

    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip() + "\n"

    out = line(header) + "-+-".join("-" * w for w in widths) + "\n"
    out += "".join(line(r) for r in body)
    if bag.exact:
        out += "exact\n"
    else:
        out += f"lower bound at level {bag.lower_bound_level}\n"
    return out
