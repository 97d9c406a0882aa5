"""Tuple-level factorization graphs (TLFGs).

A TLFG for ``S join_theta T`` is a DAG with one source node per ``S`` tuple,
one target node per ``T`` tuple and some intermediate nodes, such that a
source reaches a target exactly when the two tuples satisfy ``theta``.

Node ids are dense: source ``tid`` is node ``tid``, target ``tid`` is node
``ns + tid`` and intermediate node ``k`` is node ``ns + nt + k``. Every builder
allocates intermediate nodes so that an edge between two intermediate nodes
always goes from a lower to a higher id; ids are therefore a topological order.

All inequality builders work on *normalized* inequalities ``skey < tkey`` (or
``<=``): ``>`` and ``>=`` negate both keys, and each half of a band shifts the
target key by epsilon.
"""
from __future__ import annotations

import bisect
import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import GuardExceededError, InvalidPredicateError, UnsupportedMethodError
from .model import COMPARATORS, AtomicPredicate, PredicateDNF, PredKind, Relation, INEQUALITIES

METHODS = ("auto", "binary", "multiway", "shared", "direct")


class TLFG:
    """An immutable factorization graph between a source and a target relation."""

    def __init__(self, ns: int, nt: int, n_mid: int, tails: Sequence[int], heads: Sequence[int],
                 duplicate_free: bool = True, distinct_values: int = 0, builder: str = ""):
        self.ns = ns
        self.nt = nt
        self.n_mid = n_mid
        self.tails = np.asarray(tails, dtype=np.int64)
        self.heads = np.asarray(heads, dtype=np.int64)
        self.duplicate_free = duplicate_free
        self.distinct_values = distinct_values
        # construction that produced the graph ("binary", "shared", ...)
        self.builder = builder
        self._layers: np.ndarray | None = None
        self._check_shape()

    def _check_shape(self):
        ns, nt = self.ns, self.nt
        if len(self.tails) != len(self.heads):
            raise ValueError("tails and heads differ in length")
        if len(self.tails) == 0:
            return
        if ((self.tails >= ns) & (self.tails < ns + nt)).any():
            raise ValueError("target nodes must not have outgoing edges")
        if (self.heads < ns).any():
            raise ValueError("source nodes must not have incoming edges")
        mid_mid = (self.tails >= ns + nt) & (self.heads >= ns + nt)
        if (self.tails[mid_mid] >= self.heads[mid_mid]).any():
            raise ValueError("intermediate edges must go from lower to higher node id")

    # -- node ids -------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.ns + self.nt + self.n_mid

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    @property
    def size(self) -> int:
        return self.n_nodes + self.n_edges

    def source(self, tid: int) -> int:
        return tid

    def target(self, tid: int) -> int:
        return self.ns + tid

    def kind(self, node: int) -> str:
        if node < self.ns:
            return "source"
        if node < self.ns + self.nt:
            return "target"
        return "mid"

    def out_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for t, h in zip(self.tails.tolist(), self.heads.tolist()):
            out[t].append(h)
        return out

    # -- layering -------------------------------------------------------
    def layers(self) -> np.ndarray:
        """Layer id per node: longest path from any source; targets on layer ``d``."""
        if self._layers is not None:
            return self._layers
        n0 = self.ns + self.nt
        layer = np.zeros(self.n_nodes, dtype=np.int64)
        into_mid = self.heads >= n0
        t_m, h_m = self.tails[into_mid], self.heads[into_mid]
        # Relaxation converges in (longest mid chain + 1) rounds.
        for _ in range(32):
            new = np.zeros_like(layer)
            np.maximum.at(new, h_m, layer[t_m] + 1)
            new[:n0] = 0
            if np.array_equal(new, layer):
                break
            layer = new
        else:
            layer = self._layers_sequential(t_m, h_m)
        top = int(layer[n0:].max()) + 1 if self.n_mid else 1
        layer[self.ns:n0] = top
        self._layers = layer
        return layer

    def _layers_sequential(self, t_m, h_m) -> np.ndarray:
        layer = [0] * self.n_nodes
        order = np.argsort(h_m, kind="stable")
        for t, h in zip(t_m[order].tolist(), h_m[order].tolist()):
            v = layer[t] + 1
            if v > layer[h]:
                layer[h] = v
        return np.asarray(layer, dtype=np.int64)

    @property
    def depth(self) -> int:
        """Length (in edges) of the longest path."""
        if self.n_edges == 0:
            return 0
        layer = self.layers()
        into_target = (self.heads >= self.ns) & (self.heads < self.ns + self.nt)
        if not into_target.any():
            return int(layer[self.heads].max())
        return int((layer[self.tails[into_target]] + 1).max())

    def path_counts(self) -> dict[tuple[int, int], int]:
        """Number of distinct paths for every connected (source tid, target tid) pair."""
        n0 = self.ns + self.nt
        out = self.out_lists()
        reach: list[Counter | None] = [None] * self.n_nodes
        for s in range(self.ns):
            reach[s] = Counter({s: 1})
        counts: Counter = Counter()
        for v in itertools.chain(range(self.ns), range(n0, self.n_nodes)):
            rv = reach[v]
            if not rv:
                continue
            for h in out[v]:
                if h < n0:
                    t = h - self.ns
                    for s, c in rv.items():
                        counts[(s, t)] += c
                else:
                    if reach[h] is None:
                        reach[h] = Counter()
                    reach[h].update(rv)
            if v >= n0:
                reach[v] = None
        return dict(counts)

    def pairs(self) -> set[tuple[int, int]]:
        return set(self.path_counts())

    def dump(self) -> str:
        """Stable text serialization: one ``node`` or ``edge`` record per line."""
        layer = self.layers()
        lines = [f"node {v} {self.kind(v)} {int(layer[v])}" for v in range(self.n_nodes)]
        order = np.lexsort((self.heads, self.tails))
        lines += [f"edge {int(self.tails[i])} {int(self.heads[i])}" for i in order]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"TLFG(ns={self.ns}, nt={self.nt}, mids={self.n_mid}, edges={self.n_edges})"


@dataclass(frozen=True)
class TLFGStats:
    size: int
    depth: int
    duplication_factor: int
    distinct_values: int
    n_nodes: int
    n_edges: int


def stats(g: TLFG, count_paths: bool = True) -> TLFGStats:
    """Size, depth, duplication factor and distinct-value count of ``g``.

    Path counting is quadratic in the number of joining pairs; pass
    ``count_paths=False`` on large graphs (the duplication factor is then
    reported from the builder's guarantee).
    """
    if count_paths:
        counts = g.path_counts()
        u = max(counts.values(), default=1)
    else:
        u = 1 if g.duplicate_free else -1
    return TLFGStats(g.size, g.depth, u, g.distinct_values, g.n_nodes, g.n_edges)


@dataclass(frozen=True)
class BandGroup:
    start: float
    end: float
    target_tids: tuple[int, ...]
    source_tids: tuple[int, ...]
    epsilon: float


class _Ineq(NamedTuple):
    """Normalized inequality ``skeys[s] < tkeys[t]`` (``<=`` when not strict)."""

    skeys: Sequence[float]
    tkeys: Sequence[float]
    strict: bool


class _Builder:
    def __init__(self, ns: int, nt: int):
        self.ns = ns
        self.nt = nt
        self.base = ns + nt
        self.n_mid = 0
        self.tails: list[int] = []
        self.heads: list[int] = []
        self.delta = 0

    def mid(self) -> int:
        v = self.base + self.n_mid
        self.n_mid += 1
        return v

    def connect(self, s_ids: Sequence[int], t_ids: Sequence[int]) -> None:
        """Join every source in ``s_ids`` to every target in ``t_ids`` through one fresh node."""
        v = self.mid()
        self.tails.extend(s_ids)
        self.heads.extend([v] * len(s_ids))
        self.tails.extend([v] * len(t_ids))
        ns = self.ns
        self.heads.extend([ns + t for t in t_ids])

    def finish(self, duplicate_free: bool = True, builder: str = "") -> TLFG:
        return TLFG(self.ns, self.nt, self.n_mid, self.tails, self.heads,
                    duplicate_free=duplicate_free, distinct_values=self.delta, builder=builder)


# -- key extraction ------------------------------------------------------------

def _keys(pred: AtomicPredicate, S: Relation, T: Relation) -> tuple[list[float], list[float]]:
    return pred.left.values(S), pred.right.values(T)


def normalize_inequality(pred: AtomicPredicate, S: Relation, T: Relation) -> list[_Ineq]:
    """Rewrite an inequality or band (left side on ``S``) as ``skey < tkey`` inequalities."""
    a, b = _keys(pred, S, T)
    k = pred.kind
    if k is PredKind.LT:
        return [_Ineq(a, b, True)]
    if k is PredKind.LE:
        return [_Ineq(a, b, False)]
    if k is PredKind.GT:
        return [_Ineq([-x for x in a], [-y for y in b], True)]
    if k is PredKind.GE:
        return [_Ineq([-x for x in a], [-y for y in b], False)]
    if k is PredKind.BAND:
        eps = pred.epsilon
        return [_Ineq([-x for x in a], [eps - y for y in b], True),   # A > B - eps
                _Ineq(a, [y + eps for y in b], True)]                 # A < B + eps
    raise InvalidPredicateError(f"{k.name} is not an inequality")


def _ranked(b: _Builder, s_ids, t_ids, ineq: _Ineq):
    """Sort both sides by key and locate every distinct value's slice boundaries."""
    sk, tk = ineq.skeys, ineq.tkeys
    ss = sorted(s_ids, key=lambda i: (sk[i], i))
    tt = sorted(t_ids, key=lambda i: (tk[i], i))
    skl = [sk[i] for i in ss]
    tkl = [tk[i] for i in tt]
    vals = sorted(set(skl).union(tkl))
    delta = len(vals)
    if delta > b.delta:
        b.delta = delta
    sp = [bisect.bisect_left(skl, v) for v in vals]
    sp.append(len(ss))
    tp = [bisect.bisect_left(tkl, v) for v in vals]
    tp.append(len(tt))
    return ss, tt, sp, tp, delta


# -- single-inequality constructions -------------------------------------------

def _binary(b: _Builder, s_ids, t_ids, ineq: _Ineq,
            on_cross: Callable[[list[int], list[int]], None] | None = None) -> None:
    """Binary partitioning on the median distinct value.

    ``on_cross(S1, T2)`` is invoked for every partition pair that satisfies the
    inequality wholesale; by default the pair is joined through a pivot node.
    """
    if not s_ids or not t_ids:
        return
    if on_cross is None:
        on_cross = b.connect
    ss, tt, sp, tp, delta = _ranked(b, s_ids, t_ids, ineq)
    strict = ineq.strict
    stack = [(0, delta)]
    while stack:
        lo, hi = stack.pop()
        if sp[hi] == sp[lo] or tp[hi] == tp[lo]:
            continue
        if hi - lo == 1:
            if not strict:
                on_cross(ss[sp[lo]:sp[hi]], tt[tp[lo]:tp[hi]])
            continue
        mid = lo + (hi - lo) // 2
        if sp[mid] > sp[lo] and tp[hi] > tp[mid]:
            on_cross(ss[sp[lo]:sp[mid]], tt[tp[mid]:tp[hi]])
        stack.append((mid, hi))
        stack.append((lo, mid))


def _ceil_sqrt(d: int) -> int:
    r = math.isqrt(d)
    return r if r * r == d else r + 1


def _multiway(b: _Builder, s_ids, t_ids, ineq: _Ineq) -> None:
    """Multiway partitioning into ceil(sqrt(delta)) value ranges per step (depth 3)."""
    if not s_ids or not t_ids:
        return
    ss, tt, sp, tp, delta = _ranked(b, s_ids, t_ids, ineq)
    ns = b.ns
    tails, heads = b.tails, b.heads
    stack = [(0, delta)]
    while stack:
        lo, hi = stack.pop()
        if sp[hi] == sp[lo] or tp[hi] == tp[lo]:
            continue
        d = hi - lo
        if d == 1:
            if not ineq.strict:
                x, y = b.mid(), b.mid()
                src = ss[sp[lo]:sp[hi]]
                tails.extend(src)
                heads.extend([x] * len(src))
                tails.append(x)
                heads.append(y)
                dst = tt[tp[lo]:tp[hi]]
                tails.extend([y] * len(dst))
                heads.extend([ns + t for t in dst])
            continue
        rho = _ceil_sqrt(d)
        bounds = [lo + (k * d) // rho for k in range(rho + 1)]
        s_has = [sp[bounds[k + 1]] > sp[bounds[k]] for k in range(rho)]
        t_has = [tp[bounds[k + 1]] > tp[bounds[k]] for k in range(rho)]
        s_before = list(itertools.accumulate(s_has, lambda acc, v: acc or v, initial=False))[:-1]
        t_after = list(itertools.accumulate(reversed(t_has), lambda acc, v: acc or v,
                                            initial=False))[:-1][::-1]
        xs = [b.mid() if s_has[k] and t_after[k] else None for k in range(rho)]
        ys = [b.mid() if t_has[k] and s_before[k] else None for k in range(rho)]
        for k in range(rho):
            x = xs[k]
            if x is not None:
                src = ss[sp[bounds[k]]:sp[bounds[k + 1]]]
                tails.extend(src)
                heads.extend([x] * len(src))
            y = ys[k]
            if y is not None:
                dst = tt[tp[bounds[k]]:tp[bounds[k + 1]]]
                tails.extend([y] * len(dst))
                heads.extend([ns + t for t in dst])
                for j in range(k):
                    if xs[j] is not None:
                        tails.append(xs[j])
                        heads.append(y)
        for k in range(rho - 1, -1, -1):
            stack.append((bounds[k], bounds[k + 1]))


def _shared(b: _Builder, s_ids, t_ids, ineq: _Ineq) -> None:
    """Shared ranges: a chain over distinct target values, sources enter at their range."""
    if not s_ids or not t_ids:
        return
    sk, tk = ineq.skeys, ineq.tkeys
    tvals = sorted({tk[t] for t in t_ids})
    if len(tvals) > b.delta:
        b.delta = len(tvals)
    find = bisect.bisect_right if ineq.strict else bisect.bisect_left
    entry = {}
    for s in sorted(s_ids, key=lambda i: (sk[i], i)):
        j = find(tvals, sk[s])
        if j < len(tvals):
            entry[s] = j
    if not entry:
        return
    first = min(entry.values())
    chain = [b.mid() for _ in range(len(tvals) - first)]
    tails, heads = b.tails, b.heads
    for i in range(len(chain) - 1):
        tails.append(chain[i])
        heads.append(chain[i + 1])
    for s, j in entry.items():
        tails.append(s)
        heads.append(chain[j - first])
    ns = b.ns
    pos = {v: i for i, v in enumerate(tvals)}
    for t in sorted(t_ids, key=lambda i: (tk[i], i)):
        j = pos[tk[t]]
        if j >= first:
            tails.append(chain[j - first])
            heads.append(ns + t)


_SINGLE = {"binary": _binary, "multiway": _multiway, "shared": _shared}


def _nonequality(b: _Builder, s_ids, t_ids, a, c, single) -> None:
    # a < c and a > c never hold together, so the union stays duplicate-free
    single(b, s_ids, t_ids, _Ineq(a, c, True))
    single(b, s_ids, t_ids, _Ineq([-x for x in a], [-y for y in c], True))


def band_groups(s_ids, t_ids, a: Sequence[float], c: Sequence[float], eps: float) -> list[BandGroup]:
    """Greedy epsilon-interval grouping of targets plus the sources each group may join."""
    if not t_ids:
        return []
    tt = sorted(t_ids, key=lambda i: (c[i], i))
    ss = sorted(s_ids, key=lambda i: (a[i], i))
    akl = [a[i] for i in ss]
    groups = []
    start = c[tt[0]]
    members = [tt[0]]

    def close(members, start):
        end = c[members[-1]]
        # strict band: a source at exactly start-eps or end+eps joins nothing here
        lo = bisect.bisect_right(akl, start - eps)
        hi = bisect.bisect_left(akl, end + eps)
        groups.append(BandGroup(start, end, tuple(members), tuple(ss[lo:hi]), eps))

    for t in tt[1:]:
        if c[t] > start + eps:
            close(members, start)
            start = c[t]
            members = [t]
        else:
            members.append(t)
    close(members, start)
    return groups


def _band(b: _Builder, s_ids, t_ids, a, c, eps: float, single) -> None:
    if not s_ids or not t_ids:
        return
    gt_half = _Ineq([-x for x in a], [eps - y for y in c], True)   # A > B - eps
    lt_half = _Ineq(a, [y + eps for y in c], True)                  # A < B + eps
    for g in band_groups(s_ids, t_ids, a, c, eps):
        # sources below start+eps satisfy A < B+eps for the whole group
        low = [s for s in g.source_tids if a[s] < g.start + eps]
        high = [s for s in g.source_tids if not a[s] < g.start + eps]
        single(b, low, list(g.target_tids), gt_half)
        single(b, high, list(g.target_tids), lt_half)


# -- conjunctions and DNFs -----------------------------------------------------

def _equality_groups(conj_eq: Sequence[AtomicPredicate], S: Relation, T: Relation, s_ids, t_ids):
    if not conj_eq:
        return [(list(s_ids), list(t_ids))]
    s_cols = [p.left.values(S) for p in conj_eq]
    t_cols = [p.right.values(T) for p in conj_eq]
    sg: dict[tuple, list[int]] = {}
    for s in s_ids:
        sg.setdefault(tuple(col[s] for col in s_cols), []).append(s)
    tg: dict[tuple, list[int]] = {}
    for t in t_ids:
        tg.setdefault(tuple(col[t] for col in t_cols), []).append(t)
    return [(sg[k], tg[k]) for k in sorted(sg) if k in tg]


def _next_predicate(b: _Builder, s_ids, t_ids, ineqs: list[_Ineq], base: str) -> None:
    if len(ineqs) == 1:
        _SINGLE[base](b, s_ids, t_ids, ineqs[0])
        return
    rest = ineqs[1:]
    _binary(b, s_ids, t_ids, ineqs[0],
            on_cross=lambda s1, t2: _next_predicate(b, s1, t2, rest, base))


def _conjunction(b: _Builder, S: Relation, T: Relation, conj: Sequence[AtomicPredicate],
                 single: str, conj_base: str) -> None:
    eqs = [p for p in conj if p.kind is PredKind.EQ]
    others = [p for p in conj if p.kind is not PredKind.EQ]
    groups = _equality_groups(eqs, S, T, range(S.n), range(T.n))
    if eqs:
        b.delta = max(b.delta, len(groups))
    if not others:
        for sg, tg in groups:
            b.connect(sg, tg)
        return
    if len(others) == 1:
        p = others[0]
        fn = _SINGLE[single]
        if p.kind is PredKind.NEQ:
            a, c = _keys(p, S, T)
            for sg, tg in groups:
                _nonequality(b, sg, tg, a, c, fn)
            return
        if p.kind is PredKind.BAND:
            a, c = _keys(p, S, T)
            for sg, tg in groups:
                _band(b, sg, tg, a, c, p.epsilon, fn)
            return
        (ineq,) = normalize_inequality(p, S, T)
        for sg, tg in groups:
            fn(b, sg, tg, ineq)
        return
    ineqs: list[_Ineq] = []
    for p in others:
        if p.kind is PredKind.NEQ:
            raise InvalidPredicateError("non-equality inside a conjunction must be expanded first")
        ineqs.extend(normalize_inequality(p, S, T))
    for sg, tg in groups:
        _next_predicate(b, sg, tg, ineqs, conj_base)


def expand_dnf(dnf: PredicateDNF) -> list[tuple[AtomicPredicate, ...]]:
    """Rewrite non-equalities inside multi-predicate conjunctions as two disjuncts.

    The two halves ``<`` and ``>`` are mutually exclusive, so the expansion
    does not add duplicate paths.
    """
    out = []
    for conj in dnf.disjuncts:
        non_eq = [p for p in conj if p.kind is not PredKind.EQ]
        if len(non_eq) <= 1 or not any(p.kind is PredKind.NEQ for p in conj):
            out.append(tuple(conj))
            continue
        choices = [[replace(p, kind=PredKind.LT), replace(p, kind=PredKind.GT)]
                   if p.kind is PredKind.NEQ else [p] for p in conj]
        out.extend(itertools.product(*choices))
    return out


def _orient(cond: PredicateDNF, S: Relation, T: Relation) -> PredicateDNF:
    dnf = cond.oriented(S.name)
    for p in dnf.atoms:
        if p.right.relation != T.name:
            raise InvalidPredicateError(f"predicate {p} does not relate {S.name} and {T.name}")
    return dnf


def _as_dnf(cond) -> PredicateDNF:
    if isinstance(cond, AtomicPredicate):
        return PredicateDNF.of(cond)
    if isinstance(cond, (list, tuple)):
        return PredicateDNF.of(*cond)
    return cond


def build_dnf(S: Relation, T: Relation, dnf: PredicateDNF | AtomicPredicate | None,
              method: str = "auto", guard: BuildGuard | None = None) -> TLFG:
    """TLFG for an arbitrary DNF condition, one sub-graph per disjunct, unioned.

    ``method`` picks the construction for single predicates: ``multiway``
    (depth 3), ``binary`` (depth 2), ``shared`` (linear size, linear depth) or
    ``direct`` (all joining pairs). ``auto`` uses multiway for single
    predicates and binary partitioning with a multiway base case for
    conjunctions of several inequalities. ``None`` means a cross product.
    ``guard`` only applies to ``direct`` (see :func:`build_direct`).
    """
    if method not in METHODS:
        raise UnsupportedMethodError(f"unknown method {method!r}")
    if dnf is None:
        b = _Builder(S.n, T.n)
        if S.n and T.n:
            b.connect(list(range(S.n)), list(range(T.n)))
        return b.finish(builder="cross")
    dnf = _orient(_as_dnf(dnf), S, T)
    if method == "direct":
        return build_direct(S, T, dnf, guard)
    conjs = expand_dnf(dnf)
    multi = any(sum(p.kind is not PredKind.EQ for p in c) > 1 for c in conjs)
    if multi and method in ("multiway", "shared"):
        raise UnsupportedMethodError(
            f"{method} partitioning only handles one non-equality predicate per conjunction")
    single = "multiway" if method == "auto" else method
    conj_base = "multiway" if method == "auto" else "binary"
    b = _Builder(S.n, T.n)
    for conj in conjs:
        _conjunction(b, S, T, conj, single, conj_base)
    return b.finish(duplicate_free=len(dnf.disjuncts) == 1, builder=method)


def build_conjunction(S: Relation, T: Relation, conj: Sequence[AtomicPredicate],
                      method: str = "binary") -> TLFG:
    """TLFG for a conjunction; non-equalities among several predicates become disjuncts."""
    if not conj:
        raise InvalidPredicateError("empty conjunction")
    return build_dnf(S, T, PredicateDNF.of(*conj), method)


def _pair_test(dnf: PredicateDNF, S: Relation, T: Relation):
    conjs = [[(p, p.left.values(S), p.right.values(T)) for p in c] for c in dnf.disjuncts]

    def test(i: int, j: int) -> bool:
        return any(all(p.test(a[i], c[j]) for p, a, c in conj) for conj in conjs)

    return test


def _row_mask(dnf: PredicateDNF, S: Relation, T: Relation):
    """Vectorized version of :func:`_pair_test`: all targets joining one source at once."""
    conjs = [[(p, p.left.values(S), np.asarray(p.right.values(T), dtype=float)) for p in c]
             for c in dnf.disjuncts]

    def mask(i: int) -> np.ndarray:
        out = np.zeros(T.n, dtype=bool)
        for conj in conjs:
            m = np.ones(T.n, dtype=bool)
            for p, a, c in conj:
                if p.kind is PredKind.BAND:
                    m &= np.abs(a[i] - c) < p.epsilon
                else:
                    m &= COMPARATORS[p.kind](a[i], c)
            out |= m
        return out

    return mask


@dataclass
class BuildGuard:
    """Limits for quadratic constructions; crossing one raises :class:`GuardExceededError`.

    ``deadline`` is a ``time.perf_counter()`` value.
    """

    deadline: float | None = None
    max_edges: int | None = None

    def check(self, edges: int) -> None:
        if self.max_edges is not None and edges > self.max_edges:
            raise GuardExceededError(f"more than {self.max_edges} direct edges")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise GuardExceededError("deadline passed while building direct edges")


def build_direct(S: Relation, T: Relation, condition, guard: BuildGuard | None = None) -> TLFG:
    """Depth-1 TLFG with an edge per joining pair.

    ``condition`` is a DNF/atom or any callable ``(s_tid, t_tid) -> bool``.
    """
    ns = S.n
    if callable(condition) and not isinstance(condition, (PredicateDNF, AtomicPredicate)):
        test = condition
        tails, heads = [], []
        for i in range(S.n):
            if guard is not None and not i & 0x3F:
                guard.check(len(tails))
            for j in range(T.n):
                if test(i, j):
                    tails.append(i)
                    heads.append(ns + j)
        return TLFG(S.n, T.n, 0, tails, heads, builder="direct")
    mask = _row_mask(_orient(_as_dnf(condition), S, T), S, T)
    # heads are kept narrow while accumulating; tails are rebuilt from per-row counts
    narrow = np.int32 if ns + T.n < 2 ** 31 else np.int64
    per_row = np.zeros(S.n, dtype=np.int64)
    h_parts = []
    count = 0
    for i in range(S.n):
        if guard is not None and not i & 0x3F:
            guard.check(count)
        js = np.flatnonzero(mask(i))
        if len(js):
            count += len(js)
            per_row[i] = len(js)
            h_parts.append((js + ns).astype(narrow))
    if guard is not None:
        guard.check(count)
    tails = np.repeat(np.arange(S.n, dtype=np.int64), per_row)
    heads = np.concatenate(h_parts) if h_parts else np.zeros(0, dtype=np.int64)
    return TLFG(S.n, T.n, 0, tails, heads, builder="direct")


def build_equality(S: Relation, T: Relation, eq_preds: Sequence[AtomicPredicate]) -> TLFG:
    """One intermediate node per join value present on both sides."""
    if not eq_preds:
        raise InvalidPredicateError("equality builder needs at least one equality")
    if any(p.kind is not PredKind.EQ for p in eq_preds):
        raise InvalidPredicateError("equality builder accepts equalities only")
    g = build_dnf(S, T, PredicateDNF.of(*eq_preds), "binary")
    g.builder = "equality"
    return g


def _single(S: Relation, T: Relation, pred: AtomicPredicate, method: str, kinds) -> TLFG:
    pred = _orient(PredicateDNF.of(pred), S, T).atoms[0]
    if pred.kind not in kinds:
        raise InvalidPredicateError(f"{pred.kind.name} not accepted here")
    b = _Builder(S.n, T.n)
    _conjunction(b, S, T, [pred], method, "binary")
    return b.finish(builder=method)


def build_binary_partition(S: Relation, T: Relation, ineq: AtomicPredicate) -> TLFG:
    return _single(S, T, ineq, "binary", INEQUALITIES)


def build_multiway_partition(S: Relation, T: Relation, ineq: AtomicPredicate) -> TLFG:
    return _single(S, T, ineq, "multiway", INEQUALITIES)


def build_shared_ranges(S: Relation, T: Relation, ineq: AtomicPredicate) -> TLFG:
    return _single(S, T, ineq, "shared", INEQUALITIES)


def build_nonequality(S: Relation, T: Relation, neq: AtomicPredicate, base: str = "multiway") -> TLFG:
    return _single(S, T, neq, base, {PredKind.NEQ})


def build_band(S: Relation, T: Relation, band: AtomicPredicate, base: str = "multiway") -> TLFG:
    return _single(S, T, band, base, {PredKind.BAND})
