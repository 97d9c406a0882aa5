"""Ranked and unranked enumeration of tree solutions.

A tree solution is fixed by one option per decision point visited in a
depth-first walk from the root (ports of each chosen tuple in child order,
then the intermediate nodes along each path). Ranked enumeration is Lawler's
partitioning over that serialized choice vector: a candidate copies a popped
solution up to position ``i``, takes the next-best option at ``i`` and the
best option everywhere after. Because everything after the deviation is a
best completion, a candidate's weight is its parent's weight minus the old
option's completion plus the new one's.
"""
from __future__ import annotations

import heapq
from typing import Iterable, Iterator, Sequence

from .enumgraph import EnumerationGraph, assemble
from .model import Answer, JoinQuery, PredicateDNF
from .plan import Outcome, assign_predicates


def _tie_tolerance(w: float) -> float:
    return 1e-9 * max(1.0, abs(w))


class _Walker:
    """Shared read-only view of a pruned graph used by both enumerators."""

    def __init__(self, g: EnumerationGraph):
        if g.cost is None:
            raise ValueError("graph must be pruned (dp annotations missing)")
        self.g = g
        self.opts = g.options
        self.costs = g.option_costs
        self.n_rel = g.n_rel
        self.rel_atom = g.rel_atom.tolist()
        self.rel_base = g.rel_base
        self.child_ports = [list(reversed(g.children_ports(a))) for a in range(g.ell)]
        self.ell = g.ell
        q = g.query
        self.orig_weights = [rel.weights for rel in q.atoms]
        self.sign = 1.0 if q.direction.value == "min" else -1.0

    def walk(self, prefix: Sequence[int]):
        """Materialize the solution taking ``prefix[j]`` at position ``j`` and rank 0 after."""
        opts, n_rel, rel_atom, rel_base, child_ports = (
            self.opts, self.n_rel, self.rel_atom, self.rel_base, self.child_ports)
        decs: list[int] = []
        tids = [0] * self.ell
        stack = [self.g.root]
        np_ = len(prefix)
        j = 0
        while stack:
            d = stack.pop()
            h = opts[d][prefix[j] if j < np_ else 0]
            decs.append(d)
            j += 1
            if h < n_rel:
                a = rel_atom[h]
                tid = h - rel_base[a]
                tids[a] = tid
                for pb in child_ports[a]:
                    stack.append(pb + tid)
            else:
                stack.append(h)
        ranks = list(prefix)
        ranks.extend([0] * (len(decs) - np_))
        return decs, ranks, tids

    def weight(self, tids: Sequence[int]) -> float:
        return sum(w[t] for w, t in zip(self.orig_weights, tids))


class RankedEnumerator:
    """Iterator over answers in ranking order (lightest first under MIN).

    Answers of equal weight come out in discovery order; wrap the stream in
    :func:`lexicographic_ties` for a canonical order.

    Answers that occur more than once (possible only when some edge condition
    is a disjunction) are reported once. The lookup set behind that is cleared
    whenever the emitted weight strictly increases, since duplicates always
    share a weight.
    """

    def __init__(self, g: EnumerationGraph, dedup: bool | None = None, clear_dedup: bool = True):
        self._w = _Walker(g)
        self._heap: list = []
        self._seq = 0
        self._dedup = (not g.duplicate_free) if dedup is None else dedup
        self._clear = clear_dedup
        self._seen: set = set()
        self._tier: float | None = None
        self.popped = 0
        if g.options[g.root]:
            heapq.heappush(self._heap, (g.option_costs[g.root][0], 0, None, 0, 0))

    def __iter__(self) -> Iterator[Answer]:
        return self

    def __next__(self) -> Answer:
        ans = self.next()
        if ans is None:
            raise StopIteration
        return ans

    def next(self) -> Answer | None:
        w = self._w
        heap = self._heap
        opts, costs = w.opts, w.costs
        while heap:
            weight, _, parent, pos, rank = heapq.heappop(heap)
            prefix = [rank] if parent is None else parent[:pos] + [rank]
            decs, ranks, tids = w.walk(prefix)
            self.popped += 1
            for j in range(pos, len(decs)):
                d = decs[j]
                r = ranks[j]
                if r + 1 < len(opts[d]):
                    c = costs[d]
                    self._seq += 1
                    heapq.heappush(heap, (weight - c[r] + c[r + 1], self._seq, ranks, j, r + 1))
            key = tuple(tids)
            if self._dedup:
                if self._clear and (self._tier is None or weight > self._tier + _tie_tolerance(weight)):
                    self._seen.clear()
                    self._tier = weight
                if key in self._seen:
                    continue
                self._seen.add(key)
            return Answer(key, w.weight(tids))
        return None

    def take(self, k: int | None) -> list[Answer]:
        out = []
        while k is None or len(out) < k:
            a = self.next()
            if a is None:
                break
            out.append(a)
        return out


def enumerate_unranked(g: EnumerationGraph, dedup: bool | None = None) -> Iterator[Answer]:
    """All answers in an arbitrary (depth-first) order with no priority queue."""
    w = _Walker(g)
    opts, n_rel, rel_atom, rel_base, child_ports = w.opts, w.n_rel, w.rel_atom, w.rel_base, w.child_ports
    if not opts[g.root]:
        return
    use_seen = (not g.duplicate_free) if dedup is None else dedup
    seen: set = set()
    tids = [0] * w.ell

    def apply(rest: tuple, h: int) -> tuple:
        if h < n_rel:
            a = rel_atom[h]
            tid = h - rel_base[a]
            tids[a] = tid
            return rest + tuple(pb + tid for pb in child_ports[a])
        return rest + (h,)

    # frames: [decision, option index, stack below the decision]
    frames: list[list] = []

    def descend(stack: tuple) -> None:
        while stack:
            d = stack[-1]
            rest = stack[:-1]
            frames.append([d, 0, rest])
            stack = apply(rest, opts[d][0])

    descend((g.root,))
    while True:
        key = tuple(tids)
        if not use_seen or key not in seen:
            if use_seen:
                seen.add(key)
            yield Answer(key, w.weight(tids))
        while frames:
            f = frames[-1]
            f[1] += 1
            o = opts[f[0]]
            if f[1] < len(o):
                descend(apply(f[2], o[f[1]]))
                break
            frames.pop()
        else:
            return


def apply_residual_filter(stream: Iterable[Answer], q: JoinQuery,
                          residual: Sequence[PredicateDNF]) -> Iterator[Answer]:
    """Drop answers violating any residual predicate; order is preserved."""
    if not residual:
        yield from stream
        return
    for a in stream:
        if q.satisfies(a.choice, residual):
            yield a


def lexicographic_ties(stream: Iterable[Answer]) -> Iterator[Answer]:
    """Reorder answers of equal weight by choice vector; the weight order is kept.

    Each tier is buffered until the first heavier (or lighter, under MAX)
    answer shows up, so this costs one answer of lookahead plus the tier size.
    """
    tier: list[Answer] = []
    for a in stream:
        if tier and abs(a.weight - tier[0].weight) > _tie_tolerance(tier[0].weight):
            tier.sort(key=lambda x: x.choice)
            yield from tier
            tier = []
        tier.append(a)
    tier.sort(key=lambda x: x.choice)
    yield from tier


def ranked(q: JoinQuery, method: str = "auto", k: int | None = None,
           lex_ties: bool = True) -> Iterator[Answer]:
    """Plan, build and rank-enumerate ``q``, filtering residual predicates of cyclic queries.

    With ``lex_ties`` answers of equal weight come out in choice-vector order.
    """
    plan = assign_predicates(q)
    if plan.outcome is Outcome.NO_TREE:
        raise ValueError("query admits no theta-join tree")
    g = assemble(q, plan.tree, method)
    stream: Iterable[Answer] = RankedEnumerator(g)
    stream = apply_residual_filter(stream, q, plan.residual)
    if lex_ties:
        stream = lexicographic_ties(stream)
    for i, a in enumerate(stream):
        if k is not None and i >= k:
            return
        yield a


def unranked(q: JoinQuery, method: str = "auto") -> Iterator[Answer]:
    plan = assign_predicates(q)
    if plan.outcome is Outcome.NO_TREE:
        raise ValueError("query admits no theta-join tree")
    g = assemble(q, plan.tree, method)
    yield from apply_residual_filter(enumerate_unranked(g), q, plan.residual)
