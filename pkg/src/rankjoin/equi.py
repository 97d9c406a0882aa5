"""Rewriting theta-joins as equi-joins over materialized TLFG edges.

A layered TLFG of depth ``d`` becomes ``d`` binary edge relations
``E_1..E_d``: ``E_i`` holds the edges from layer ``i-1`` to layer ``i``.
Source and target nodes are keyed by their tuple values and intermediate
nodes by ordinals scoped to the graph, so joining ``S, E_1, ..., E_d, T`` on
shared keys and projecting back onto ``S`` and ``T`` gives the theta-join.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .anyk import RankedEnumerator, apply_residual_filter, enumerate_unranked, lexicographic_ties
from .csvio import write_relation
from .enumgraph import assemble
from .errors import ReductionUnsupportedError
from .model import (Answer, AtomicPredicate, AttrRef, JoinQuery, PredicateDNF,
                    PredKind, Relation)
from .plan import Outcome, PlanResult, ThetaJoinTree, assign_predicates
from .tlfg import TLFG, build_direct

# depth of a non-empty graph from each construction; lets an empty graph keep its shape
_NOMINAL_DEPTH = {"direct": 1, "equality": 2, "binary": 2, "cross": 2, "multiway": 3, "auto": 3}

TID = "tid"


@dataclass
class AuxRelationChain:
    """Edge relations ``E_1..E_d`` standing for one TLFG.

    ``source_key`` and ``target_key`` name the columns of ``E_1`` and ``E_d``
    that hold source and target keys; middle columns are ``V1..V{d-1}``.
    """

    relations: list[Relation]
    source_key: list[str]
    target_key: list[str]
    source: str = "S"
    target: str = "T"

    @property
    def d(self) -> int:
        return len(self.relations)

    def join(self, S: Relation | None = None, T: Relation | None = None) -> set[tuple]:
        """Evaluate the chain with hash joins and project onto (source key, target key).

        With ``S`` and ``T`` given, only keys present in them survive; the
        result is a set of ``(source key tuple, target key tuple)`` pairs.
        """
        if not self.relations:
            return set()
        ks = len(self.source_key)
        kt = len(self.target_key)
        # partial paths: current frontier key -> set of source keys
        first = self.relations[0]
        src_ok = None if S is None else {tuple(r) for r in S.rows}
        frontier: dict[tuple, set[tuple]] = {}
        tail_w = ks
        for row in first.rows:
            sk = row[:ks]
            if src_ok is not None and sk not in src_ok:
                continue
            frontier.setdefault(row[tail_w:], set()).add(sk)
        for rel in self.relations[1:]:
            nxt: dict[tuple, set[tuple]] = {}
            for row in rel.rows:
                srcs = frontier.get(row[:1])
                if srcs:
                    nxt.setdefault(row[1:], set()).update(srcs)
            frontier = nxt
        tgt_ok = None if T is None else {tuple(r) for r in T.rows}
        out = set()
        for tk, srcs in frontier.items():
            if len(tk) != kt or (tgt_ok is not None and tk not in tgt_ok):
                continue
            for sk in srcs:
                out.add((sk, tk))
        return out

    def to_csv(self, directory: str | Path, prefix: str = "E") -> list[Path]:
        """Write ``E_i`` as ``{prefix}{i}.csv`` (header row, no weight column)."""
        out_dir = Path(directory)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, rel in enumerate(self.relations, start=1):
            p = out_dir / f"{prefix}{i}.csv"
            write_relation(rel, p, weight_column=None)
            paths.append(p)
        return paths


def check_adjacent(g: TLFG) -> np.ndarray:
    """Layer of every node, after checking that every edge joins consecutive layers."""
    if g.builder == "shared":
        raise ReductionUnsupportedError("shared-ranges graphs have edges that skip layers")
    layers = g.layers()
    if g.n_edges and not np.all(layers[g.heads] == layers[g.tails] + 1):
        raise ReductionUnsupportedError("graph has an edge between non-adjacent layers")
    return layers


def materialize_chain(g: TLFG, S: Relation | None = None, T: Relation | None = None) -> AuxRelationChain:
    """Edge relations of a layered TLFG.

    Source and target nodes are keyed by their tuple values when ``S`` and
    ``T`` are given, by their tids otherwise.
    """
    layers = check_adjacent(g)
    d = g.depth if g.n_edges else _NOMINAL_DEPTH.get(g.builder, max(g.depth, 1))
    s_name = S.name if S is not None else "S"
    t_name = T.name if T is not None else "T"
    if t_name == s_name:
        t_name += "'"
    s_cols = [f"{s_name}.{a}" for a in S.attributes] if S is not None else [f"{s_name}.{TID}"]
    t_cols = [f"{t_name}.{a}" for a in T.attributes] if T is not None else [f"{t_name}.{TID}"]
    ns, nt = g.ns, g.nt
    mid0 = ns + nt

    def key(node: int) -> tuple:
        if node < ns:
            return S.rows[node] if S is not None else (float(node),)
        if node < mid0:
            t = node - ns
            return T.rows[t] if T is not None else (float(t),)
        return (float(node - mid0),)

    buckets: list[list[tuple]] = [[] for _ in range(d)]
    for t, h in zip(g.tails.tolist(), g.heads.tolist()):
        buckets[int(layers[t])].append(key(t) + key(h))
    rels = []
    for i in range(d):
        left = s_cols if i == 0 else [f"V{i}"]
        right = t_cols if i == d - 1 else [f"V{i + 1}"]
        rows = sorted(set(buckets[i]))
        rels.append(Relation(f"E{i + 1}", left + right, rows))
    return AuxRelationChain(rels, s_cols, t_cols, s_name, t_name)


# -- QuadEqui ------------------------------------------------------------------

@dataclass
class QuadEquiPlan:
    """Pure equality query with one direct edge relation per tree edge.

    ``query`` holds the original atoms extended with a ``tid`` column (in the
    same order) followed by the edge relations; answers map back by taking
    the first ``ell`` positions.
    """

    query: JoinQuery
    ell: int
    edge_relations: dict[int, Relation] = field(default_factory=dict)
    residual: list[PredicateDNF] = field(default_factory=list)

    @property
    def edge_sizes(self) -> dict[int, int]:
        return {c: r.n for c, r in self.edge_relations.items()}


def _with_tid(rel: Relation) -> Relation:
    if TID in rel.attributes:
        raise ReductionUnsupportedError(f"relation {rel.name} already has a {TID!r} column")
    rows = [row + (float(i),) for i, row in enumerate(rel.rows)]
    return Relation(rel.name, list(rel.attributes) + [TID], rows, rel.weights)


def quad_equi_plan(q: JoinQuery, plan: ThetaJoinTree | PlanResult | None = None) -> QuadEquiPlan:
    """Replace every tree edge by its quadratic direct edge relation."""
    residual: list[PredicateDNF] = []
    if plan is None:
        plan = assign_predicates(q)
    if isinstance(plan, PlanResult):
        if plan.outcome is Outcome.NO_TREE:
            raise ValueError("query admits no theta-join tree")
        residual = plan.residual
        tree = plan.tree
    else:
        tree = plan
    atoms = [_with_tid(r) for r in q.atoms]
    taken = {r.name for r in atoms}
    preds: list[PredicateDNF] = []
    edges: dict[int, Relation] = {}
    for c in tree.order:
        p = tree.parent[c]
        if p is None:
            continue
        S, T = q.atoms[p], q.atoms[c]
        g = build_direct(S, T, tree.conditions[c]) if tree.conditions[c] is not None else None
        if g is None:
            pairs = [(i, j) for i in range(S.n) for j in range(T.n)]
        else:
            pairs = list(zip(g.tails.tolist(), (g.heads - g.ns).tolist()))
        name = f"E_{S.name}_{T.name}"
        while name in taken:
            name += "_"
        taken.add(name)
        e = Relation(name, ["src", "dst"], pairs)
        edges[c] = e
        preds.append(PredicateDNF.of(AtomicPredicate(PredKind.EQ, AttrRef(S.name, TID), AttrRef(name, "src"))))
        preds.append(PredicateDNF.of(AtomicPredicate(PredKind.EQ, AttrRef(name, "dst"), AttrRef(T.name, TID))))
    eq_query = JoinQuery(atoms + [edges[c] for c in tree.order if c in edges], preds, q.direction)
    return QuadEquiPlan(eq_query, q.ell, edges, residual)


def quad_equi_ranked(q: JoinQuery, plan: ThetaJoinTree | PlanResult | None = None) -> Iterator[Answer]:
    """Ranked answers of ``q`` computed through its QuadEqui reformulation."""
    qp = quad_equi_plan(q, plan)
    g = assemble(qp.query, None, "binary")
    return lexicographic_ties(apply_residual_filter(_project(RankedEnumerator(g), qp.ell), q, qp.residual))


def quad_equi_unranked(q: JoinQuery, plan: ThetaJoinTree | PlanResult | None = None) -> Iterator[Answer]:
    qp = quad_equi_plan(q, plan)
    g = assemble(qp.query, None, "binary")
    return apply_residual_filter(_project(enumerate_unranked(g), qp.ell), q, qp.residual)


def _project(stream, ell: int) -> Iterator[Answer]:
    for a in stream:
        yield Answer(a.choice[:ell], a.weight)
