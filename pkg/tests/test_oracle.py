import pytest

from chasebag.chase import ChaseConfig, run_chase
from chasebag.evaluation import EvalMode, evaluate_certain_bag
from chasebag.model import AnswerBag, Fact, make_tuple
from chasebag.oracle import (
    OracleScaleError,
    brute_force_certain_bag,
    derivation_search,
    diff_bags,
    null_origins,
    verify,
)

import randgen


def bag(entries, arity=1):
    return AnswerBag({make_tuple(*k): m for k, m in entries.items()}, arity)


def test_diff_equal_bags():
    assert diff_bags(bag({("a",): 1}), bag({("a",): 1})) == []


def test_diff_multiplicity_mismatch():
    (d,) = diff_bags(bag({("a",): 2}), bag({("a",): 1}))
    assert (d.tuple, d.lhs, d.rhs) == (make_tuple("a"), 2, 1)


def test_diff_missing_key():
    (d,) = diff_bags(bag({}), bag({("b",): 1}))
    assert (d.tuple, d.lhs, d.rhs) == (make_tuple("b"), 0, 1)
    assert d.render() == "(b) 0 != 1"


def test_diff_arity_mismatch():
    with pytest.raises(ValueError, match="arity"):
        diff_bags(bag({}, 1), bag({}, 2))


def test_brute_force_plain(load):
    program, q = load("rel R/2. R(a,b).", "q(x) <- R(x,y).")
    assert brute_force_certain_bag(q, program).entries == {make_tuple("a"): 1}


def test_brute_force_shared_target(load):
    program, q = load("rel R/1. rel S/1. rel P/1. R(a). S(a). R(x) -> P(x). S(x) -> P(x).", "q(x) <- P(x).")
    assert brute_force_certain_bag(q, program).entries == {make_tuple("a"): 1}


def test_brute_force_counts_null_witnesses(load):
    program, q = load("rel P/1. rel R/2. P(a). P(b). P(x) -> exists y: R(x,y).", "q() <- R(x,y).")
    assert brute_force_certain_bag(q, program).entries == {(): 2}


def test_brute_force_whole_query(load):
    program, q = load("rel R/2. rel T/1. R(a,b). T(a).", "q(x) <- R(x,y) | T(x).")
    assert brute_force_certain_bag(q, program, mode=EvalMode.WHOLE_QUERY).entries == {make_tuple("a"): 2}


def test_brute_force_guards(load):
    facts = " ".join(f"R(c{i})." for i in range(11))
    program, q = load("rel R/1. " + facts, "q(x) <- R(x).")
    with pytest.raises(OracleScaleError, match="oracle scale exceeded"):
        brute_force_certain_bag(q, program)
    program, q = load("rel R/1. R(a).", "q() <- R(a1), R(a2), R(a3), R(a4), R(a5), R(a6), R(a7), R(a8), R(a9).")
    with pytest.raises(OracleScaleError, match="oracle scale exceeded"):
        brute_force_certain_bag(q, program)


CHAIN = "rel R/1. rel S/1. rel T/1. R(a). R(x) -> S(x). S(x) -> T(x)."


def _fact(program, rel, *names):
    return Fact(program.schema[rel], make_tuple(*names))


def test_derivation_chain(load):
    program = load(CHAIN)
    path = derivation_search(program, _fact(program, "T", "a"), 5)
    assert path == [_fact(program, r, "a") for r in "RST"]


def test_derivation_of_base_fact(load):
    program = load(CHAIN)
    assert derivation_search(program, _fact(program, "R", "a"), 1) == [_fact(program, "R", "a")]


def test_no_derivation(load):
    program = load(CHAIN)
    assert derivation_search(program, _fact(program, "T", "b"), 5) is None
    # depth bounds the number of rule steps
    assert derivation_search(program, _fact(program, "T", "a"), 1) is None


def test_derivation_through_tgd(load):
    program = load("rel P/1. rel R/2. rel S/2. P(a). P(x) -> exists y: R(x,y). R(x,y) -> S(x,y).")
    result = run_chase(program, ChaseConfig(trace=True))
    origins = null_origins(result)
    target = next(f for f in result.instance if f.relation.name == "S")
    path = derivation_search(program, target, 4, origins)
    assert path is not None and path[0] == _fact(program, "P", "a") and path[-1] == target
    assert derivation_search(program, target, 4) is None


def test_null_origins_needs_trace(load):
    with pytest.raises(ValueError):
        null_origins(run_chase(load(CHAIN)))


def test_verify_reports_planted_divergence(load):
    program, q = load("rel R/2. R(a,b). R(a,c).", "q(x) <- R(x,y).")
    (d,) = verify(q, program, bag({("a",): 3}))
    assert (d.lhs, d.rhs) == (3, 2)


@pytest.mark.parametrize("program, q", list(randgen.fixtures(41, 30, n_ids=2, n_tgds=1, max_facts=5, n_disjuncts=2)))
def test_differential_identity(program, q):
    for mode in EvalMode:
        engine = evaluate_certain_bag(q, program, mode=mode)
        try:
            assert brute_force_certain_bag(q, program, mode=mode) == engine
        except OracleScaleError:
            pytest.skip("outside oracle guards")
