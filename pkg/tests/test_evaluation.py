import itertools

import pytest

from chasebag.chase import ChaseConfig, run_chase
from chasebag.evaluation import (
    EvalMode,
    SchemaMismatch,
    evaluate_certain_bag,
    evaluate_cq_bag,
    satisfying_groundings,
)
from chasebag.model import (
    ConjunctiveDisjunct,
    Constant,
    Grounding,
    LabeledNull,
    Variable,
    adom,
    apply_grounding,
    make_tuple,
)
from chasebag.textio import parse_query

import randgen

a, b, c = Constant("a"), Constant("b"), Constant("c")
x, y = Variable("x"), Variable("y")


def _disjunct(load, program_text, body):
    program, q = load(program_text, f"q() <- {body}.")
    return q.disjuncts[0], program.instance


def test_groundings_two_witnesses(load):
    d, inst = _disjunct(load, "rel R/2. R(a,b). R(a,c).", "R(x,y)")
    assert satisfying_groundings(d, inst) == {Grounding.of({x: a, y: b}), Grounding.of({x: a, y: c})}


def test_groundings_no_diagonal(load):
    d, inst = _disjunct(load, "rel R/2. R(a,b).", "R(x,x)")
    assert satisfying_groundings(d, inst) == set()


def test_groundings_join(load):
    d, inst = _disjunct(load, "rel R/2. rel S/1. R(a,b). S(b). S(c).", "R(x,y), S(y)")
    assert satisfying_groundings(d, inst) == {Grounding.of({x: a, y: b})}


def test_groundings_independent_of_atom_order(load):
    program = load("rel R/2. rel S/1. R(a,b). R(b,c). R(c,c). S(b). S(c).")
    d1 = parse_query("q() <- R(x,y), S(y), R(y,z).", program.schema).disjuncts[0]
    d2 = ConjunctiveDisjunct(tuple(reversed(d1.atoms)))
    assert satisfying_groundings(d1, program.instance) == satisfying_groundings(d2, program.instance)


def test_bag_counts_witnesses(load):
    program, q = load("rel R/2. R(a,b). R(a,c). R(b,c).", "q(x) <- R(x,y).")
    bag = evaluate_cq_bag(q, program.instance)
    assert bag.entries == {make_tuple("a"): 2, make_tuple("b"): 1} and bag.exact


UNION = ("rel R/2. rel T/1. R(a,b). T(a).", "q(x) <- R(x,y) | T(x).")


def test_union_per_disjunct(load):
    program, q = load(*UNION)
    assert evaluate_cq_bag(q, program.instance).entries == {make_tuple("a"): 2}


def _brute_whole_query(q, inst):
    domain = adom(inst)
    facts = set(inst)
    counts = {}
    for combo in itertools.product(domain, repeat=len(q.variables)):
        g = dict(zip(q.variables, combo))
        if any(set(apply_grounding(d.atoms, g)) <= facts for d in q.disjuncts):
            key = tuple(g[v] for v in q.head_vars)
            counts[key] = counts.get(key, 0) + 1
    return counts


def test_union_whole_query(load):
    program, q = load(*UNION)
    expected = _brute_whole_query(q, program.instance)
    # x=a with y in {a, b}; x=b satisfies neither disjunct
    assert expected == {make_tuple("a"): 2}
    bag = evaluate_cq_bag(q, program.instance, mode=EvalMode.WHOLE_QUERY)
    assert bag.entries == {make_tuple("a"): 2}


def test_boolean_query(load):
    program, q = load("rel R/2. R(a,b). R(b,c).", "q() <- R(x,y).")
    assert evaluate_cq_bag(q, program.instance).entries == {(): 2}
    program, q = load("rel R/2.", "q() <- R(x,y).")
    assert evaluate_cq_bag(q, program.instance).entries == {}


def test_answer_domain_filters_keys(load):
    program, q = load("rel R/2. R(a,b). R(c,b).", "q(x) <- R(x,y).")
    small = load("rel R/2. R(a,a).").instance
    assert evaluate_cq_bag(q, program.instance, small).entries == {make_tuple("a"): 1}


def test_schema_mismatch(load):
    _, q = load("rel R/2.", "q(x) <- R(x,y).")
    other = load("rel R/1. R(a).").instance
    with pytest.raises(SchemaMismatch):
        evaluate_cq_bag(q, other)


def test_certain_id_adds_fact_once(load):
    # two routes to P(a); the restricted chase stores it once
    program, q = load("rel R/1. rel S/1. rel P/1. R(a). S(a). R(x) -> P(x). S(x) -> P(x).", "q(x) <- P(x).")
    assert evaluate_certain_bag(q, program).entries == {make_tuple("a"): 1}


def test_certain_tgd_witness_is_null(load):
    program, q = load("rel P/1. rel R/2. P(a). P(x) -> exists y: R(x,y).", "q(x) <- R(x,y).")
    bag = evaluate_certain_bag(q, program)
    assert bag.entries == {make_tuple("a"): 1} and bag.exact
    assert not any(isinstance(t, LabeledNull) for k in bag.keys() for t in k)


def test_certain_lower_bound_tag(load):
    program, q = load("rel S/2. S(a,b). S(x,y) -> exists z: S(y,z).", "q() <- S(x,y).")
    bag = evaluate_certain_bag(q, program, ChaseConfig(max_level=5))
    assert bag.lower_bound_level == 5 and not bag.exact
    assert bag.entries == {(): 6}


def test_nulls_never_become_answers(load):
    program, q = load("rel S/2. S(a,b). S(x,y) -> exists z: S(y,z).", "q(y) <- S(x,y).")
    bag = evaluate_certain_bag(q, program, ChaseConfig(max_level=4))
    assert bag.entries == {make_tuple("b"): 1}


# -- properties ---------------------------------------------------------------


def _pairs(seed, count, **kw):
    return list(randgen.fixtures(seed, count, **kw))


@pytest.mark.parametrize("program, q", _pairs(21, 40, n_ids=0, n_tgds=0))
def test_empty_sigma_equivalence(program, q):
    for mode in EvalMode:
        certain = evaluate_certain_bag(q, program, mode=mode)
        assert certain == evaluate_cq_bag(q, program.instance, program.instance, mode)


@pytest.mark.parametrize("program, q", _pairs(22, 30, n_disjuncts=1))
def test_modes_coincide_for_single_disjunct(program, q):
    per = evaluate_certain_bag(q, program, mode=EvalMode.PER_DISJUNCT)
    whole = evaluate_certain_bag(q, program, mode=EvalMode.WHOLE_QUERY)
    assert per == whole


@pytest.mark.parametrize("program, q", _pairs(23, 30, n_ids=2, n_tgds=2))
def test_monotone_in_level(program, q):
    prev = None
    for cap in (0, 1, 2, 4, 8):
        bag = evaluate_certain_bag(q, program, ChaseConfig(max_level=cap))
        if prev is not None:
            assert set(prev.keys()) <= set(bag.keys())
            assert all(prev[k] <= bag[k] for k in prev.keys())
        prev = bag


def test_loop_query_multiplicities_grow(load):
    program, q = load("rel S/2. S(a,b). S(x,y) -> exists z: S(y,z).", "q() <- S(x,y).")
    counts = [evaluate_certain_bag(q, program, ChaseConfig(max_level=k))[()] for k in (1, 2, 3)]
    assert counts == [2, 3, 4]


@pytest.mark.parametrize("program, q", _pairs(24, 30, n_ids=1, n_tgds=2, n_disjuncts=2))
def test_groundings_agree_with_plain_enumeration(program, q):
    chased = run_chase(program).instance
    facts = set(chased)
    domain = adom(chased)
    for d in q.disjuncts:
        expected = set()
        for combo in itertools.product(domain, repeat=len(d.variables)):
            g = dict(zip(d.variables, combo))
            if set(apply_grounding(d.atoms, g)) <= facts:
                expected.add(Grounding.of(g))
        assert satisfying_groundings(d, chased) == expected
