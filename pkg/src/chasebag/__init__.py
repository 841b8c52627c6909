"""Bag-set certain answers of unions of conjunctive queries over incomplete
databases with inclusion and tuple-generating dependencies."""

from .aggregates import AggregateSpec, AggregateValue, aggregate, aggregate_certain
from .chase import (
    ChaseConfig,
    ChaseResult,
    Strategy,
    applicable,
    apply_rule,
    derivable,
    run_chase,
)
from .evaluation import EvalMode, evaluate_certain_bag, evaluate_cq_bag, satisfying_groundings
from .model import (
    AnswerBag,
    Atom,
    ConjunctiveDisjunct,
    Constant,
    Dependency,
    Fact,
    Grounding,
    Instance,
    LabeledNull,
    RelationSymbol,
    Schema,
    UCQ,
    Variable,
    adom,
    apply_grounding,
)
from .oracle import brute_force_certain_bag, derivation_search, diff_bags
from .rewriting import evaluate_via_rewriting, perfect_rewrite
from .textio import Program, SourceError, parse_program, parse_query, render_bag

__version__ = "0.1.0"

__all__ = [
    "AggregateSpec",
    "AggregateValue",
    "aggregate",
    "aggregate_certain",
    "ChaseConfig",
    "ChaseResult",
    "Strategy",
    "applicable",
    "apply_rule",
    "derivable",
    "run_chase",
    "EvalMode",
    "evaluate_certain_bag",
    "evaluate_cq_bag",
    "satisfying_groundings",
    "AnswerBag",
    "Atom",
    "ConjunctiveDisjunct",
    "Constant",
    "Dependency",
    "Fact",
    "Grounding",
    "Instance",
    "LabeledNull",
    "RelationSymbol",
    "Schema",
    "UCQ",
    "Variable",
    "adom",
    "apply_grounding",
    "brute_force_certain_bag",
    "derivation_search",
    "diff_bags",
    "evaluate_via_rewriting",
    "perfect_rewrite",
    "Program",
    "SourceError",
    "parse_program",
    "parse_query",
    "render_bag",
]
