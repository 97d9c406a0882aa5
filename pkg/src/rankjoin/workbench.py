"""Oracle, Batch baseline, synthetic data and timing harness."""
from __future__ import annotations

import heapq
import math
import time
import tracemalloc
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .anyk import RankedEnumerator, apply_residual_filter, enumerate_unranked, lexicographic_ties
from .enumgraph import assemble
from .equi import quad_equi_plan
from .errors import GuardExceededError, UnsupportedMethodError
from .model import (Answer, AtomicPredicate, AttrRef, Direction, JoinQuery, PredicateDNF,
                    PredKind, Relation)
from .plan import Outcome, assign_predicates
from .tlfg import BuildGuard

ORACLE_LIMIT = 10 ** 7
DOMAIN = 10 ** 4


# -- oracle ---------------------------------------------------------------------

def oracle_join(q: JoinQuery, limit: int = ORACLE_LIMIT) -> list[Answer]:
    """Every answer of ``q`` by nested loops, sorted by ranking weight then choice vector.

    Predicates are checked as soon as both of their relations are bound, which
    keeps the loops cheap, but the guard is on the full Cartesian product.
    """
    if math.prod(r.n for r in q.atoms) > limit:
        raise GuardExceededError(f"cartesian product exceeds {limit}")
    ell = q.ell
    # predicates become checkable at the later of their two atoms
    checks: list[list[tuple[PredicateDNF, int, int]]] = [[] for _ in range(ell)]
    for dnf in q.predicates:
        i, j = sorted(q.index(r) for r in dnf.relations)
        checks[j].append((dnf.oriented(q.atoms[i].name), i, j))
    cols = []
    for lvl in range(ell):
        entries = []
        for dnf, i, j in checks[lvl]:
            conjs = [[(p, p.left.values(q.atoms[i]), p.right.values(q.atoms[j])) for p in c]
                     for c in dnf.disjuncts]
            entries.append((conjs, i))
        cols.append(entries)

    out: list[tuple[int, ...]] = []
    choice = [0] * ell

    def ok(lvl: int) -> bool:
        t = choice[lvl]
        for conjs, i in cols[lvl]:
            s = choice[i]
            if not any(all(p.test(a[s], c[t]) for p, a, c in conj) for conj in conjs):
                return False
        return True

    def rec(lvl: int) -> None:
        if lvl == ell:
            out.append(tuple(choice))
            return
        for t in range(q.atoms[lvl].n):
            choice[lvl] = t
            if ok(lvl):
                rec(lvl + 1)

    rec(0)
    sign = 1.0 if q.direction is Direction.MIN else -1.0
    answers = [Answer(c, q.answer_weight(c)) for c in out]
    answers.sort(key=lambda a: (sign * a.weight, a.choice))
    return answers


# -- Batch ----------------------------------------------------------------------

def batch_baseline(q: JoinQuery, max_output: int = 2 * 10 ** 7,
                   deadline: float | None = None) -> Iterator[Answer]:
    """Materialize the whole join through direct TLFGs, heapify it, pop in order.

    ``deadline`` is an absolute ``time.perf_counter()`` value. Passing it,
    or exceeding ``max_output`` answers (or direct edges on any tree edge),
    raises :class:`GuardExceededError` on the first ``next()``.
    """
    plan = assign_predicates(q)
    if plan.outcome is Outcome.NO_TREE:
        raise ValueError("query admits no theta-join tree")
    rq = q.ranking_view()
    g = assemble(q, plan.tree, "direct", guard=BuildGuard(deadline, max_output))
    weights = [r.weights for r in rq.atoms]
    heap = []
    for i, a in enumerate(apply_residual_filter(enumerate_unranked(g), q, plan.residual)):
        if i >= max_output:
            raise GuardExceededError(f"join output exceeds {max_output} answers")
        if deadline is not None and not i & 0x3FF and time.perf_counter() > deadline:
            raise GuardExceededError("deadline passed while materializing the join")
        heap.append((sum(w[t] for w, t in zip(weights, a.choice)), a.choice, a.weight))
    heapq.heapify(heap)
    while heap:
        _, choice, weight = heapq.heappop(heap)
        yield Answer(choice, weight)


# -- engine dispatch ------------------------------------------------------------

ENGINES = ("auto", "binary", "multiway", "shared", "direct", "quadequi", "batch")


def stream_answers(q: JoinQuery, method: str = "auto", ranked: bool = True,
                   info: dict | None = None) -> Iterator[Answer]:
    """Answers of ``q`` from the chosen engine.

    Planning and graph construction happen before this returns, so errors
    surface immediately; enumeration itself is lazy. ``info`` (if given)
    receives the plan outcome and ``graph_size``.
    """
    if method not in ENGINES:
        raise UnsupportedMethodError(f"unknown method {method!r}")
    info = {} if info is None else info
    plan = assign_predicates(q)
    info["outcome"] = plan.outcome.value
    if plan.outcome is Outcome.NO_TREE:
        raise UnsupportedMethodError("query admits no theta-join tree")
    if method == "batch":
        if ranked:
            return batch_baseline(q)
        method = "direct"
    if method == "quadequi":
        qp = quad_equi_plan(q, plan)
        g = assemble(qp.query, None, "binary")
        info["aux_size"] = sum(qp.edge_sizes.values())
        inner = RankedEnumerator(g) if ranked else enumerate_unranked(g)
        inner = (Answer(a.choice[:q.ell], a.weight) for a in inner)
    else:
        g = assemble(q, plan.tree, method)
        inner = RankedEnumerator(g) if ranked else enumerate_unranked(g)
    info["graph_size"] = g.n_vertices + g.n_edges
    stream = apply_residual_filter(inner, q, plan.residual)
    return lexicographic_ties(stream) if ranked else stream


# -- synthetic data -------------------------------------------------------------

def gen_synthetic(n: int, ell: int, seed: int, domain: int = DOMAIN) -> list[Relation]:
    """Relations ``S_i(A_{2i-1}, A_{2i})`` with distinct uniform integer rows.

    Attribute values are drawn from ``[0, domain)`` with replacement and
    duplicate rows are discarded until ``n`` remain; weights are uniform
    reals in ``[0, 10**4)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > domain * domain:
        raise ValueError("not enough distinct rows in the domain")
    rng = np.random.default_rng(seed)
    rels = []
    for i in range(1, ell + 1):
        seen: dict[tuple[int, int], None] = {}
        while len(seen) < n:
            block = rng.integers(0, domain, size=(max(n - len(seen), 16), 2))
            for a, b in block.tolist():
                if len(seen) == n:
                    break
                seen.setdefault((a, b), None)
        weights = rng.uniform(0, DOMAIN, size=n)
        rels.append(Relation(f"S{i}", [f"A{2 * i - 1}", f"A{2 * i}"], list(seen), weights.tolist()))
    return rels


def gen_items(n: int, ell: int, seed: int, suppliers: int = 50) -> list[Relation]:
    """Lineitem-shaped relations for the Q_T template (no real TPC-H data)."""
    rng = np.random.default_rng(seed)
    rels = []
    for i in range(1, ell + 1):
        sk = rng.integers(0, suppliers, size=n)
        qty = rng.integers(1, 51, size=n)
        price = rng.uniform(900, 105000, size=n).round(2)
        ship = rng.integers(0, 2500, size=n)
        commit = ship + rng.integers(-30, 60, size=n)
        receipt = ship + rng.integers(1, 30, size=n)
        rows = np.stack([sk, qty, ship, commit, receipt], axis=1).tolist()
        rels.append(Relation(f"Item{i}", ["SK", "Q", "S", "C", "R"], rows, price.tolist()))
    return rels


def gen_points(n: int, seed: int, copies: int = 2) -> list[Relation]:
    """Observation-shaped relations for the Q_B template: (lat, lon) and a count weight."""
    rng = np.random.default_rng(seed)
    lat = rng.uniform(-50, 0, size=n).round(3)
    lon = rng.uniform(110, 180, size=n).round(3)
    cnt = rng.integers(1, 500, size=n).astype(float)
    rows = np.stack([lat, lon], axis=1).tolist()
    return [Relation(f"Birds{i}", ["LA", "LO"], rows, cnt.tolist()) for i in range(1, copies + 1)]


# -- query templates -------------------------------------------------------------

def _ref(rel: Relation, attr: str) -> AttrRef:
    return AttrRef(rel.name, attr)


def q_s1(rels: Sequence[Relation]) -> JoinQuery:
    """Chain of single inequalities ``A_{2i} < A_{2i+1}``."""
    preds = []
    for i in range(len(rels) - 1):
        left, right = rels[i], rels[i + 1]
        preds.append(PredicateDNF.of(AtomicPredicate(
            PredKind.LT, _ref(left, left.attributes[1]), _ref(right, right.attributes[0]))))
    return JoinQuery(list(rels), preds)


def q_s2(rels: Sequence[Relation], eps: float = 50) -> JoinQuery:
    """Chain of ``|A_{2i} - A_{2i+1}| < eps AND A_{2i-1} != A_{2i+2}``."""
    preds = []
    for i in range(len(rels) - 1):
        left, right = rels[i], rels[i + 1]
        preds.append(PredicateDNF.of(
            AtomicPredicate(PredKind.BAND, _ref(left, left.attributes[1]),
                            _ref(right, right.attributes[0]), float(eps)),
            AtomicPredicate(PredKind.NEQ, _ref(left, left.attributes[0]),
                            _ref(right, right.attributes[1]))))
    return JoinQuery(list(rels), preds)


def q_t(rels: Sequence[Relation], disjunctive: bool = False) -> JoinQuery:
    """Same supplier, increasing quantity and ship date (or any date, if disjunctive)."""
    preds = []
    for i in range(len(rels) - 1):
        a, b = rels[i], rels[i + 1]
        preds.append(PredicateDNF.of(AtomicPredicate(PredKind.EQ, _ref(a, "SK"), _ref(b, "SK"))))
        q_lt = AtomicPredicate(PredKind.LT, _ref(a, "Q"), _ref(b, "Q"))
        if disjunctive:
            preds.append(PredicateDNF.any_of(*[
                (q_lt, AtomicPredicate(PredKind.LT, _ref(a, d), _ref(b, d))) for d in ("S", "C", "R")]))
        else:
            preds.append(PredicateDNF.of(q_lt, AtomicPredicate(PredKind.LT, _ref(a, "S"), _ref(b, "S"))))
    return JoinQuery(list(rels), preds)


def q_b(rels: Sequence[Relation], eps: float = 0.05) -> JoinQuery:
    """Two-dimensional band join ranked by descending total count."""
    a, b = rels[0], rels[1]
    pred = PredicateDNF.of(
        AtomicPredicate(PredKind.BAND, _ref(a, "LA"), _ref(b, "LA"), float(eps)),
        AtomicPredicate(PredKind.BAND, _ref(a, "LO"), _ref(b, "LO"), float(eps)))
    return JoinQuery([a, b], [pred], Direction.MAX)


TEMPLATES: dict[str, Callable] = {"QS1": q_s1, "QS2": q_s2, "QT": q_t, "QB": q_b}


# -- measurement ----------------------------------------------------------------

@dataclass
class MetricsReport:
    tt_k: dict[int, float] = field(default_factory=dict)
    mem_peak: dict[int, int] = field(default_factory=dict)
    delay: list[float] = field(default_factory=list)
    graph_size: int | None = None
    answers: int = 0

    def windowed_delay(self, window: int = 1000) -> list[float]:
        d = self.delay
        return [sum(d[i:i + window]) / len(d[i:i + window]) for i in range(0, len(d), window)]


def measure(run: Callable[[], Iterable], checkpoints: Sequence[int],
            track_memory: bool = False, keep_delays: bool = True) -> MetricsReport:
    """Time ``run()`` (preprocessing included) until each checkpoint answer.

    Memory, when tracked, is the peak of Python allocations seen by
    ``tracemalloc`` up to each checkpoint: a proxy, not resident memory.
    """
    cps = list(checkpoints)
    if cps != sorted(cps):
        raise ValueError("checkpoints must be ascending")
    rep = MetricsReport()
    if track_memory:
        tracemalloc.start()
        tracemalloc.reset_peak()
    try:
        start = time.perf_counter()
        last = start
        it = iter(run())
        k = 0
        nxt = 0
        for _ in it:
            now = time.perf_counter()
            k += 1
            if keep_delays:
                rep.delay.append(now - last)
            last = now
            while nxt < len(cps) and cps[nxt] == k:
                rep.tt_k[k] = now - start
                if track_memory:
                    rep.mem_peak[k] = tracemalloc.get_traced_memory()[1]
                nxt += 1
            if nxt == len(cps):
                break
        rep.answers = k
    finally:
        if track_memory:
            tracemalloc.stop()
    return rep
