"""count / count_distinct / sum / avg over bag-set certain answers.

Values are exact rationals. A bag that is only a lower bound (chase stopped at
its cap) still yields honest lower bounds for count and for sums of
nonnegative values; avg and count_distinct are refused on such input because
they are not monotone in the bag.
"""

from __future__ import annotations

import decimal
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .chase import ChaseConfig
from .evaluation import EvalMode, evaluate_certain_bag
from .model import AnswerBag, UCQ
from .textio import Program

FUNCTIONS = ("count", "count_distinct", "sum", "avg")
_DECIMAL_RE = re.compile(r"[+-]?[0-9]+(\.[0-9]+)?\Z")
INEXACT_MESSAGE = "inexact input: rerun with higher chase level or rewrite mode"


class AggregateError(ValueError):
    pass


@dataclass(frozen=True)
class AggregateSpec:
    fn: str
    arg_position: Optional[int] = None  # 1-based column

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise AggregateError(f"unknown aggregate function {self.fn!r}")
        if self.fn in ("sum", "avg") and self.arg_position is None:
            raise AggregateError(f"{self.fn} needs an argument position")
        if self.arg_position is not None and self.arg_position < 1:
            raise AggregateError("argument positions are 1-based")


@dataclass(frozen=True)
class AggregateValue:
    value: Fraction
    exact: bool

    def decimal(self, digits: int = 12) -> str:
        ctx = decimal.Context(prec=digits)
        q = ctx.divide(decimal.Decimal(self.value.numerator), decimal.Decimal(self.value.denominator))
        return format(q, "f")


def render_aggregate(spec: AggregateSpec, v: AggregateValue) -> str:
    frac = f"{v.value.numerator}/{v.value.denominator}"
    return f"fn={spec.fn} value={frac} ({v.decimal()}) exact={str(v.exact).lower()}"


def numeric(text: str) -> Fraction:
    if not _DECIMAL_RE.match(text):
        raise AggregateError(f"non-numeric aggregate column: {text!r}")
    return Fraction(text)


def aggregate(bag: AnswerBag, spec: AggregateSpec) -> AggregateValue:
    if spec.arg_position is not None and spec.arg_position > bag.arity:
        raise AggregateError(
            f"argument position {spec.arg_position} exceeds query arity {bag.arity}"
        )
    if spec.fn == "count":
        return AggregateValue(Fraction(bag.total), bag.exact)
    if spec.fn == "count_distinct":
        if not bag.exact:
            raise AggregateError(INEXACT_MESSAGE)
        return AggregateValue(Fraction(len(bag)), True)

    col = spec.arg_position - 1
    terms = [(numeric(key[col].name), m) for key, m in bag.items()]
    total = sum((x * m for x, m in terms), Fraction(0))
    if spec.fn == "sum":
        if not bag.exact and any(x < 0 for x, _ in terms):
            raise AggregateError(INEXACT_MESSAGE)
        return AggregateValue(total, bag.exact)
    # avg
    if not bag.exact:
        raise AggregateError(INEXACT_MESSAGE)
    count = bag.total
    if count == 0:
        raise AggregateError("undefined average")
    return AggregateValue(total / count, True)


def aggregate_certain(q_aux: UCQ, program: Program, spec: AggregateSpec,
                      config: ChaseConfig = ChaseConfig(),
                      mode: EvalMode = EvalMode.PER_DISJUNCT) -> AggregateValue:
    """Aggregate over the certain answers of an auxiliary query."""
    if spec.arg_position is not None and spec.arg_position > q_aux.arity:
        raise AggregateError(
            f"argument position {spec.arg_position} exceeds query arity {q_aux.arity}"
        )
    return aggregate(evaluate_certain_bag(q_aux, program, config, mode), spec)
