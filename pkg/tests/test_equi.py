import csv
import random

import pytest

from rankjoin import JoinQuery, PredicateDNF, Relation, band, eq, eval_dnf, gt, le, lt, neq
from rankjoin.anyk import ranked
from rankjoin.equi import (AuxRelationChain, check_adjacent, materialize_chain, quad_equi_plan,
                           quad_equi_ranked, quad_equi_unranked)
from rankjoin.errors import ReductionUnsupportedError
from rankjoin.tlfg import build_dnf

from instances import CONFIGS, brute_answers, chain_instance


def rel(name, n, rng, hi=10):
    return Relation(name, ["A", "B"], [(rng.randrange(hi), rng.randrange(hi)) for _ in range(n)])


def value_pairs(S, T, dnf):
    return {(S.rows[i], T.rows[j]) for i in range(S.n) for j in range(T.n) if eval_dnf(dnf, S, i, T, j)}


PREDICATES = {
    "lt": lambda: PredicateDNF.of(lt("S.A", "T.B")),
    "le": lambda: PredicateDNF.of(le("S.A", "T.B")),
    "neq": lambda: PredicateDNF.of(neq("S.A", "T.B")),
    "band": lambda: PredicateDNF.of(band("S.A", "T.B", 2)),
    "eq": lambda: PredicateDNF.of(eq("S.A", "T.B")),
    "conj": lambda: PredicateDNF.of(lt("S.A", "T.A"), gt("S.B", "T.B")),
    "dnf": lambda: PredicateDNF.any_of((lt("S.A", "T.A"),), (gt("S.B", "T.B"),)),
}


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("method", ["direct", "binary", "multiway", "auto"])
def test_chain_join_equals_theta_join(method, seed):
    rng = random.Random(seed)
    kind = sorted(PREDICATES)[seed % len(PREDICATES)]
    S, T = rel("S", rng.randint(0, 64), rng), rel("T", rng.randint(0, 64), rng)
    dnf = PREDICATES[kind]()
    if method == "multiway" and len(dnf.disjuncts[0]) > 1:
        method = "auto"
    g = build_dnf(S, T, dnf, method)
    chain = materialize_chain(g, S, T)
    assert chain.d == max(g.depth, 1) or g.n_edges == 0
    assert chain.join(S, T) == value_pairs(S, T, dnf)


@pytest.mark.parametrize("seed", range(10))
def test_equality_graph_chain(seed):
    rng = random.Random(seed)
    S, T = rel("S", 40, rng), rel("T", 40, rng)
    dnf = PredicateDNF.of(eq("S.A", "T.B"))
    chain = materialize_chain(build_dnf(S, T, dnf), S, T)
    assert chain.d == 2
    assert chain.join(S, T) == value_pairs(S, T, dnf)


def test_shared_ranges_is_rejected():
    rng = random.Random(0)
    S, T = rel("S", 20, rng), rel("T", 20, rng)
    g = build_dnf(S, T, PredicateDNF.of(lt("S.A", "T.B")), "shared")
    with pytest.raises(ReductionUnsupportedError):
        check_adjacent(g)
    with pytest.raises(ReductionUnsupportedError):
        materialize_chain(g, S, T)


def test_empty_graph_gives_empty_relations():
    S = Relation("S", ["A"], [(5,)])
    T = Relation("T", ["B"], [(1,)])
    chain = materialize_chain(build_dnf(S, T, lt("S.A", "T.B"), "multiway"), S, T)
    assert chain.d == 3
    assert all(r.n == 0 for r in chain.relations)
    assert chain.join(S, T) == set()


def test_binary_first_relation_keys_sources_by_value():
    S = Relation("S", ["A"], [(1,), (2,)])
    T = Relation("T", ["B"], [(3,), (4,)])
    chain = materialize_chain(build_dnf(S, T, lt("S.A", "T.B"), "binary"), S, T)
    assert chain.d == 2
    e1, e2 = chain.relations
    assert e1.attributes == ("S.A", "V1") and e2.attributes == ("V1", "T.B")
    assert {row[0] for row in e1.rows} == {1.0, 2.0}
    assert {row[1] for row in e2.rows} == {3.0, 4.0}
    assert chain.join(S, T) == {((a,), (b,)) for a in (1.0, 2.0) for b in (3.0, 4.0)}


def test_self_join_renames_target_columns():
    R = Relation("R", ["A"], [(1,), (2,)])
    g = build_dnf(R, R.copy("R2"), lt("R.A", "R2.A"), "direct")
    chain = materialize_chain(g, R, R)
    assert chain.relations[0].attributes == ("R.A", "R'.A")
    assert chain.join(R, R) == {((1.0,), (2.0,))}


def test_tid_keys_without_relations():
    S = Relation("S", ["A"], [(1,), (1,)])
    T = Relation("T", ["B"], [(3,)])
    chain = materialize_chain(build_dnf(S, T, lt("S.A", "T.B"), "direct"))
    assert chain.source_key == ["S.tid"] and chain.target_key == ["T.tid"]
    assert chain.join() == {((0.0,), (0.0,)), ((1.0,), (0.0,))}


def test_chain_csv_export(tmp_path):
    S = Relation("S", ["A"], [(1,), (2,)])
    T = Relation("T", ["B"], [(3,)])
    chain = materialize_chain(build_dnf(S, T, lt("S.A", "T.B"), "binary"), S, T)
    paths = chain.to_csv(tmp_path, prefix="S_T_E")
    assert [p.name for p in paths] == ["S_T_E1.csv", "S_T_E2.csv"]
    with open(paths[0], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["S.A", "V1"]
    assert len(rows) == 1 + chain.relations[0].n


def test_aux_chain_with_no_relations():
    assert AuxRelationChain([], ["S.A"], ["T.B"]).join() == set()


# -- QuadEqui --------------------------------------------------------------------

def test_quad_equi_all_pairs_edge_is_quadratic():
    n = 12
    R = Relation("R", ["A"], [(0,)] * n)
    S = Relation("S", ["B"], [(1,)] * n)
    qp = quad_equi_plan(JoinQuery([R, S], [PredicateDNF.of(lt("R.A", "S.B"))]))
    assert list(qp.edge_sizes.values()) == [n * n]
    assert all(p.is_equi for p in qp.query.predicates)


def test_quad_equi_empty_join():
    R = Relation("R", ["A"], [(5,)] * 4)
    S = Relation("S", ["B"], [(1,)] * 4)
    q = JoinQuery([R, S], [PredicateDNF.of(lt("R.A", "S.B"))])
    assert list(quad_equi_plan(q).edge_sizes.values()) == [0]
    assert list(quad_equi_ranked(q)) == []


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("kind", CONFIGS)
def test_quad_equi_matches_factorized_ranking(kind, seed):
    q = chain_instance(kind, 3, seed)
    expected = brute_answers(q)
    assert [(a.choice, a.weight) for a in quad_equi_ranked(q)] == expected
    assert [(a.choice, a.weight) for a in ranked(q)] == expected
    assert sorted((a.choice, a.weight) for a in quad_equi_unranked(q)) == sorted(expected)


def test_quad_equi_rejects_existing_tid_column():
    R = Relation("R", ["tid"], [(0,)])
    S = Relation("S", ["B"], [(1,)])
    with pytest.raises(ReductionUnsupportedError):
        quad_equi_plan(JoinQuery([R, S], [PredicateDNF.of(lt("R.tid", "S.B"))]))
