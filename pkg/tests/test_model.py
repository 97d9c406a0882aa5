import itertools
import math

import pytest
from hypothesis import given, strategies as st

from rankjoin import (Answer, AtomicPredicate, AttrRef, Direction, JoinQuery, PredicateDNF,
                      PredKind, Relation, band, eq, eval_atomic, eval_dnf, ge, gt, le, lt, neq)
from rankjoin.errors import InvalidPredicateError, SchemaError
from rankjoin.model import answer_weight


def pair(a, b):
    S = Relation("S", ["A", "B", "C", "D"], [a])
    T = Relation("T", ["A", "B", "C", "D"], [b])
    return S, T


def test_relation_basics():
    r = Relation("R", ["A", "B"], [(1, 2), (3, 4)], [0.5, 1.5])
    assert r.n == 2 and len(r) == 2
    assert r[1].values == (3.0, 4.0) and r[1].weight == 1.5 and r[1].tid == 1
    assert [t.tid for t in r] == [0, 1]
    assert r.column("B") == [2.0, 4.0]
    assert r.negated().weights == [-0.5, -1.5]
    assert r.copy("R2").name == "R2"


def test_relation_schema_errors():
    with pytest.raises(SchemaError):
        Relation("R", ["A", "A"], [])
    with pytest.raises(SchemaError):
        Relation("R", ["A", "B"], [(1,)])
    with pytest.raises(SchemaError):
        Relation("R", ["A"], [(1,)], [1, 2])
    with pytest.raises(SchemaError):
        Relation("R", ["A"], [(1,)]).column("Z")


def test_attr_ref_parse_and_affine():
    assert AttrRef.parse("R.A") == AttrRef("R", "A")
    ref = AttrRef("R", "A")
    assert AttrRef.parse(ref) is ref
    with pytest.raises(SchemaError):
        AttrRef.parse("RA")
    r = Relation("R", ["A"], [(2,), (5,)])
    assert AttrRef("R", "A", scale=2.0, offset=1.0).values(r) == [5.0, 11.0]


def test_lt_on_3_4_is_true():
    S, T = pair((3, 0, 0, 0), (0, 4, 0, 0))
    assert eval_atomic(lt("S.A", "T.B"), S, 0, T, 0)


def test_band_eps4_on_11_8_is_true():
    S, T = pair((11, 0, 0, 0), (0, 8, 0, 0))
    assert eval_atomic(band("S.A", "T.B", 4), S, 0, T, 0)


def test_band_is_strict():
    S, T = pair((12, 0, 0, 0), (0, 8, 0, 0))
    assert not eval_atomic(band("S.A", "T.B", 4), S, 0, T, 0)


def test_neq_on_equal_values_is_false():
    S, T = pair((5, 0, 0, 0), (0, 5, 0, 0))
    assert not eval_atomic(neq("S.A", "T.B"), S, 0, T, 0)


def test_dnf_with_second_disjunct_true():
    dnf = PredicateDNF.any_of((lt("S.A", "T.B"), lt("S.A", "T.C")), (neq("S.A", "T.D"),))
    S, T = pair((9, 0, 0, 0), (0, 1, 1, 2))
    assert eval_dnf(dnf, S, 0, T, 0)
    S, T = pair((2, 0, 0, 0), (0, 1, 1, 2))
    assert not eval_dnf(dnf, S, 0, T, 0)


def test_single_equality_conjunction():
    S, T = pair((7, 0, 0, 0), (7, 0, 0, 0))
    assert eval_dnf(PredicateDNF.of(eq("S.A", "T.A")), S, 0, T, 0)


def test_eval_accepts_tuples_and_reversed_orientation():
    S, T = pair((1, 0, 0, 0), (0, 2, 0, 0))
    assert eval_atomic(gt("T.B", "S.A"), S, S[0], T, T[0])


def test_predicate_validation():
    with pytest.raises(InvalidPredicateError):
        band("S.A", "T.B", 0)
    with pytest.raises(InvalidPredicateError):
        band("S.A", "T.B", math.inf)
    with pytest.raises(InvalidPredicateError):
        lt("S.A", "S.B")
    with pytest.raises(InvalidPredicateError):
        AtomicPredicate(PredKind.LT, AttrRef("S", "A"), AttrRef("T", "B"), 1.0)


def test_dnf_rejects_three_relations():
    with pytest.raises(SchemaError):
        PredicateDNF.any_of((lt("S.A", "T.B"),), (lt("S.A", "U.B"),))


def test_dnf_derived_quantities():
    dnf = PredicateDNF.any_of((eq("S.A", "T.A"), lt("S.B", "T.B"), gt("S.C", "T.C")), (neq("S.A", "T.B"),))
    assert dnf.p == 2
    assert dnf.size == 4
    assert not dnf.is_equi
    assert PredicateDNF.of(eq("S.A", "T.A")).p == 0
    assert PredicateDNF.of(eq("S.A", "T.A")).is_equi


def test_dnf_and_distributes():
    a = PredicateDNF.any_of((lt("S.A", "T.A"),), (gt("S.B", "T.B"),))
    b = PredicateDNF.of(eq("S.C", "T.C"))
    both = a.and_(b)
    assert len(both.disjuncts) == 2
    assert all(len(c) == 2 for c in both.disjuncts)


def test_flipped_predicate_is_equivalent():
    S = Relation("S", ["A"], [(1,), (5,)])
    T = Relation("T", ["B"], [(3,), (5,)])
    for p in (lt("S.A", "T.B"), le("S.A", "T.B"), ge("S.A", "T.B"), band("S.A", "T.B", 2.5)):
        f = p.flipped()
        for i, j in itertools.product(range(2), range(2)):
            assert eval_atomic(p, S, i, T, j) == eval_atomic(f, S, i, T, j)


values = st.integers(min_value=-5, max_value=5)
kinds = st.sampled_from([k for k in PredKind if k is not PredKind.BAND])


@given(a=values, b=values, kind=kinds, eps=st.floats(min_value=0.5, max_value=4))
def test_atomic_matches_python_operators(a, b, kind, eps):
    S, T = pair((a, 0, 0, 0), (0, b, 0, 0))
    ops = {PredKind.EQ: a == b, PredKind.LT: a < b, PredKind.GT: a > b, PredKind.LE: a <= b,
           PredKind.GE: a >= b, PredKind.NEQ: a != b}
    assert eval_atomic(AtomicPredicate(kind, AttrRef("S", "A"), AttrRef("T", "B")), S, 0, T, 0) == ops[kind]
    assert eval_atomic(band("S.A", "T.B", eps), S, 0, T, 0) == (abs(a - b) < eps)


@given(s=st.tuples(values, values, values, values), t=st.tuples(values, values, values, values),
       shape=st.lists(st.lists(st.tuples(st.sampled_from("ABCD"), kinds, st.sampled_from("ABCD")),
                               min_size=1, max_size=3), min_size=1, max_size=3))
def test_dnf_truth_table(s, t, shape):
    S, T = pair(s, t)
    conjs = [tuple(AtomicPredicate(k, AttrRef("S", x), AttrRef("T", y)) for x, k, y in c) for c in shape]
    dnf = PredicateDNF.any_of(*conjs)
    expected = any(all(eval_atomic(p, S, 0, T, 0) for p in c) for c in conjs)
    assert eval_dnf(dnf, S, 0, T, 0) == expected
    assert eval_dnf(dnf, S, 0, T, 0) == eval_dnf(dnf, S, 0, T, 0)


def test_answer_weight_two_terms():
    q = JoinQuery([Relation("R", ["A"], [(0,)], [1.5]), Relation("S", ["A"], [(0,)], [2.5])], [])
    assert answer_weight(q, (0, 0)) == 4.0


def test_answer_weight_zero_and_out_of_range():
    q = JoinQuery([Relation("R", ["A"], [(0,)]), Relation("S", ["A"], [(0,)])], [])
    assert q.answer_weight((0, 0)) == 0.0
    with pytest.raises(IndexError):
        q.answer_weight((0, 1))


@given(st.lists(st.lists(st.integers(0, 100), min_size=1, max_size=5), min_size=4, max_size=4),
       st.data())
def test_answer_weight_is_plain_sum(weights, data):
    rels = [Relation(f"R{i}", ["A"], [(0,)] * len(w), w) for i, w in enumerate(weights)]
    q = JoinQuery(rels, [])
    choice = tuple(data.draw(st.integers(0, len(w) - 1)) for w in weights)
    assert q.answer_weight(choice) == sum(w[c] for w, c in zip(weights, choice))


def test_max_view_negates_weights():
    rels = [Relation("R", ["A"], [(0,), (1,)], [1, 3]), Relation("S", ["A"], [(0,)], [2])]
    q = JoinQuery(rels, [], Direction.MAX)
    view = q.ranking_view()
    assert view.atoms[0].weights == [-1.0, -3.0]
    choices = [(0, 0), (1, 0)]
    assert max(choices, key=q.answer_weight) == min(choices, key=view.answer_weight)


def test_query_requires_distinct_names():
    r = Relation("R", ["A"], [(0,)])
    with pytest.raises(SchemaError):
        JoinQuery([r, r], [])


def test_answer_is_value_object():
    assert Answer((0, 1), 2.0) == Answer((0, 1), 2.0)
