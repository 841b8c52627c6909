"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 semantic error, 3 when
``--verify`` found divergences. Errors go to stderr as ``error[<code>]: ...``.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .aggregates import FUNCTIONS, AggregateError, AggregateSpec, aggregate, render_aggregate
from .chase import DEFAULT_MAX_LEVEL, ChaseConfig, ChaseError, Strategy, run_chase
from .evaluation import EvalMode, SchemaMismatch, evaluate_certain_bag
from .oracle import OracleScaleError, diff_bags, verify
from .rewriting import evaluate_via_rewriting, perfect_rewrite
from .textio import SourceError, parse_program, parse_query, render_bag, render_facts

ENV_MAX_LEVEL = "CHASEBAG_MAX_LEVEL"
_UNSET = object()  # --max-level not given; None means unbounded


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, 1)


def _level(text: str):
    if text == "unbounded":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("level must be nonnegative")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chasebag", description="Bag-set certain answers over incomplete databases.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, query=True):
        sp.add_argument("-i", "--input", required=True, help=".idb program file")
        if query:
            sp.add_argument("-q", "--query", required=True, help=".uq query file")
        sp.add_argument("--out", help="write output here instead of stdout")

    def chase_flags(sp):
        sp.add_argument("--max-level", type=_level, default=_UNSET,
                        help=f"chase level cap or 'unbounded' (default ${ENV_MAX_LEVEL} or {DEFAULT_MAX_LEVEL})")
        sp.add_argument("--strategy", choices=[s.value for s in Strategy], default="restricted")
        sp.add_argument("--timeout", type=float, default=None, help="wall-clock guard in seconds")

    sp = sub.add_parser("chase", help="print the chase of a program")
    common(sp, query=False)
    chase_flags(sp)
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("answer", help="bag-set certain answers of a query")
    common(sp)
    chase_flags(sp)
    sp.add_argument("--mode", choices=["chase", "rewrite", "both"], default="chase")
    sp.add_argument("--scope", choices=[m.value for m in EvalMode], default="per-disjunct")
    sp.add_argument("--format", choices=["table", "csv", "json"], default="table")
    sp.add_argument("--trace", action="store_true")
    sp.add_argument("--verify", action="store_true", help="cross-check against the brute-force oracle")

    sp = sub.add_parser("rewrite", help="print the query with dependencies compiled in")
    common(sp)

    sp = sub.add_parser("aggregate", help="aggregate over certain answers")
    common(sp)
    chase_flags(sp)
    sp.add_argument("--fn", choices=FUNCTIONS)
    sp.add_argument("--arg", type=int, default=None, help="1-based column for sum/avg")
    sp.add_argument("--mode", choices=["chase", "rewrite"], default="chase")
    sp.add_argument("--scope", choices=[m.value for m in EvalMode], default="per-disjunct")
    sp.add_argument("--verify", action="store_true")
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError("io", f"{path}: {exc}", 1) from None


def _load(args):
    try:
        program = parse_program(_read(args.input))
    except SourceError as exc:
        raise CliError("parse", f"{args.input}:{exc}", 1) from None
    query = None
    if getattr(args, "query", None):
        try:
            query = parse_query(_read(args.query), program.schema)
        except SourceError as exc:
            raise CliError("parse", f"{args.query}:{exc}", 1) from None
    return program, query


def _validate(args):
    explicit_level = getattr(args, "max_level", _UNSET) is not _UNSET
    if args.command == "aggregate":
        if args.fn is None:
            raise CliError("usage", "aggregate requires --fn", 1)
        if args.fn in ("sum", "avg") and args.arg is None:
            raise CliError("usage", f"--fn {args.fn} requires --arg", 1)
    if getattr(args, "mode", None) == "rewrite" and (explicit_level or args.strategy != "restricted"):
        raise CliError("usage", "chase flags (--max-level, --strategy) have no effect in rewrite mode", 1)
    if args.command == "answer" and args.trace and args.mode == "rewrite":
        raise CliError("usage", "--trace needs a chase (mode chase or both)", 1)
    if args.command == "rewrite":
        return None
    level = args.max_level
    if not explicit_level:
        env = os.environ.get(ENV_MAX_LEVEL)
        if env:
            try:
                level = _level(env)
            except argparse.ArgumentTypeError as exc:
                raise CliError("usage", f"{ENV_MAX_LEVEL}: {exc}", 1) from None
        else:
            level = DEFAULT_MAX_LEVEL
    try:
        return ChaseConfig(
            max_level=level,
            strategy=Strategy(args.strategy),
            trace=getattr(args, "trace", False),
            timeout=args.timeout,
        )
    except ValueError as exc:
        raise CliError("usage", str(exc), 1) from None


def _verify_section(q, program, bag, config, mode, context) -> (str, bool):
    try:
        divs = verify(q, program, bag, config, mode, context)
    except OracleScaleError as exc:
        raise CliError("oracle", str(exc), 2) from None
    out = "## verify\n"
    if not divs:
        return out + "no divergences\n", False
    return out + "".join(d.render() + "\n" for d in divs), True


def _run(args) -> (str, int):
    config = _validate(args)
    program, q = _load(args)
    status = 0

    if args.command == "chase":
        result = run_chase(program, config)
        out = ""
        if result.trace is not None:
            out += "".join(rec.render() + "\n" for rec in result.trace)
        out += render_facts(result.instance)
        out += result.summary() + "\n"
        return out, 0

    if args.command == "rewrite":
        return perfect_rewrite(q, program.dependencies).render(), 0

    mode = EvalMode(args.scope)
    if args.command == "answer":
        out = ""
        chase_bag = rewrite_bag = None
        if args.mode in ("chase", "both"):
            result = run_chase(program, config)
            if result.trace is not None:
                out += "".join(rec.render() + "\n" for rec in result.trace)
            chase_bag = evaluate_certain_bag(q, program, config, mode, chase_result=result)
        if args.mode in ("rewrite", "both"):
            rewrite_bag = evaluate_via_rewriting(q, program, mode)
        if args.mode == "both":
            out += "## chase\n" + render_bag(chase_bag, args.format)
            out += "## rewrite\n" + render_bag(rewrite_bag, args.format)
            divs = diff_bags(chase_bag, rewrite_bag, "chase vs rewrite")
            out += "## divergences\n"
            out += "".join(d.render() + "\n" for d in divs) if divs else "none\n"
        else:
            out += render_bag(chase_bag or rewrite_bag, args.format)
        if args.verify:
            bag = chase_bag if chase_bag is not None else rewrite_bag
            section, diverged = _verify_section(q, program, bag, config, mode, f"{args.mode} vs oracle")
            out += section
            status = 3 if diverged else 0
        return out, status

    # aggregate
    spec = AggregateSpec(args.fn, args.arg)
    if args.mode == "rewrite":
        bag = evaluate_via_rewriting(q, program, mode)
    else:
        bag = evaluate_certain_bag(q, program, config, mode)
    out = render_aggregate(spec, aggregate(bag, spec)) + "\n"
    if args.verify:
        section, diverged = _verify_section(q, program, bag, config, mode, f"{args.mode} vs oracle")
        out += section
        status = 3 if diverged else 0
    return out, status


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        out, status = _run(args)
    except CliError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.status
    except AggregateError as exc:
        print(f"error[aggregate]: {exc}", file=sys.stderr)
        return 2
    except SchemaMismatch as exc:
        print(f"error[schema]: {exc}", file=sys.stderr)
        return 2
    except ChaseError as exc:
        print(f"error[chase]: {exc}", file=sys.stderr)
        return 2
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(out)
        except OSError as exc:
            print(f"error[io]: {args.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(out)
    return status


if __name__ == "__main__":
    sys.exit(main())
