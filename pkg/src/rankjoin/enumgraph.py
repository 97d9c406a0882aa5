"""Enumeration graph: relation layers joined by one TLFG per theta-join tree edge.

Global node ids are laid out as

    [relation nodes | intermediate nodes | ports | root]

Relation node ``rel_base[a] + tid`` stands for tuple ``tid`` of atom ``a``.
For a tree edge into child atom ``c`` the TLFG's source nodes become *ports*
``port_base[c] + parent_tid``: a parent tuple with several children owns one
port per child, and each port picks a path into its child's layer. The root
node picks a tuple of the root atom. Ports, intermediate nodes and the root are
the decision points of the enumeration; every decision point keeps its
surviving options sorted by the lightest completion below them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import JoinQuery
from .plan import Outcome, PlanResult, ThetaJoinTree, assign_predicates
from .tlfg import TLFG, BuildGuard, build_dnf

INF = math.inf
# regions deeper than this are processed by a sequential pass instead of per layer
_LAYERED_MAX_DEPTH = 32


@dataclass
class _Region:
    child: int
    g: TLFG
    tails: np.ndarray   # global ids
    heads: np.ndarray   # global ids
    tail_layer: np.ndarray
    local_tails: np.ndarray


@dataclass
class EnumerationGraph:
    query: JoinQuery            # original query (original weights)
    tree: ThetaJoinTree
    method: str
    tlfgs: dict[int, TLFG]      # child atom -> TLFG from its parent
    rel_base: list[int]
    mid_base: dict[int, int]
    port_base: dict[int, int]
    n_rel: int
    n_nodes: int
    root: int
    weights: np.ndarray         # ranking weights of relation nodes (negated under MAX)
    rel_atom: np.ndarray
    regions: list[_Region]
    cost: np.ndarray | None = None
    alive: np.ndarray | None = None
    edge_alive: list[np.ndarray] | None = None
    options: list[list[int] | None] = field(default_factory=list)
    option_costs: list[list[float] | None] = field(default_factory=list)

    @property
    def ell(self) -> int:
        return self.query.ell

    @property
    def n_layers(self) -> int:
        """Total number of layers (relation layers plus intermediate TLFG layers)."""
        return self.ell + sum(max(g.depth - 1, 0) for g in self.tlfgs.values())

    @property
    def duplicate_free(self) -> bool:
        return all(g.duplicate_free for g in self.tlfgs.values())

    @property
    def n_edges(self) -> int:
        if self.edge_alive is None:
            return sum(len(r.tails) for r in self.regions)
        return int(sum(m.sum() for m in self.edge_alive))

    @property
    def n_vertices(self) -> int:
        if self.alive is None:
            return self.n_rel + sum(g.n_mid for g in self.tlfgs.values())
        mids = sum(int(self.alive[self.mid_base[c]:self.mid_base[c] + g.n_mid].sum())
                   for c, g in self.tlfgs.items())
        return int(self.alive[:self.n_rel].sum()) + mids

    def surviving(self, atom: int) -> list[int]:
        """tids of ``atom`` still present after pruning."""
        base = self.rel_base[atom]
        n = self.query.atoms[atom].n
        if self.alive is None:
            return list(range(n))
        return np.flatnonzero(self.alive[base:base + n]).tolist()

    def children_ports(self, atom: int) -> list[int]:
        return [self.port_base[c] for c in self.tree.children[atom]]

    def explain(self) -> dict:
        from .tlfg import stats
        q = self.query
        edges = []
        for c in self.tree.order:
            p = self.tree.parent[c]
            if p is None:
                continue
            g = self.tlfgs[c]
            st = stats(g, count_paths=g.ns * g.nt <= 250_000)
            cond = self.tree.conditions[c]
            edges.append({
                "parent": q.atoms[p].name, "child": q.atoms[c].name,
                "condition": str(cond) if cond is not None else "TRUE",
                "size": st.size, "depth": st.depth, "duplication": st.duplication_factor,
                "distinct_values": st.distinct_values,
            })
        return {"edges": edges, "layers": self.n_layers,
                "vertices": self.n_vertices, "edge_count": self.n_edges}


def _region_arrays(g: TLFG, child: int, rel_base_child: int, mid_base: int, port_base: int):
    ns, nt = g.ns, g.nt
    lt, lh = g.tails, g.heads

    def to_global(local):
        return np.where(local < ns, port_base + local,
                        np.where(local < ns + nt, rel_base_child + (local - ns),
                                 mid_base + (local - ns - nt)))

    layer = g.layers()
    return _Region(child, g, to_global(lt), to_global(lh), layer[lt], lt)


def assemble(q: JoinQuery, tree: ThetaJoinTree | PlanResult | None = None, method: str = "auto",
             prune: bool = True, guard: BuildGuard | None = None) -> EnumerationGraph:
    """Build every edge's TLFG and lay them out as one enumeration graph.

    With ``prune`` (default) dangling nodes are removed and the bottom-up
    dynamic program is run, leaving the graph ready for enumeration.
    """
    if tree is None:
        plan = assign_predicates(q)
        if plan.outcome is Outcome.NO_TREE:
            raise ValueError("query admits no theta-join tree")
        tree = plan.tree
    elif isinstance(tree, PlanResult):
        tree = tree.tree
    rq = q.ranking_view()
    rel_base, off = [], 0
    for rel in q.atoms:
        rel_base.append(off)
        off += rel.n
    n_rel = off
    tlfgs: dict[int, TLFG] = {}
    for c in tree.order:
        p = tree.parent[c]
        if p is not None:
            tlfgs[c] = build_dnf(q.atoms[p], q.atoms[c], tree.conditions[c], method, guard)
    mid_base, port_base = {}, {}
    for c in tree.order:
        if c in tlfgs:
            mid_base[c] = off
            off += tlfgs[c].n_mid
    for c in tree.order:
        if c in tlfgs:
            port_base[c] = off
            off += q.atoms[tree.parent[c]].n
    root = off
    n_nodes = off + 1
    weights = np.zeros(n_rel)
    rel_atom = np.zeros(n_rel, dtype=np.int64)
    for a, rel in enumerate(rq.atoms):
        weights[rel_base[a]:rel_base[a] + rel.n] = rel.weights
        rel_atom[rel_base[a]:rel_base[a] + rel.n] = a
    regions = [_region_arrays(tlfgs[c], c, rel_base[c], mid_base[c], port_base[c])
               for c in tree.order if c in tlfgs]
    g = EnumerationGraph(q, tree, method, tlfgs, rel_base, mid_base, port_base, n_rel,
                         n_nodes, root, weights, rel_atom, regions)
    if prune:
        prune_unreachable(g)
    return g


def _min_into(cost: np.ndarray, region: _Region) -> None:
    """cost[tail] = min(cost[tail], cost[head]) for all region edges, bottom-up."""
    tails, heads = region.tails, region.heads
    if len(tails) == 0:
        return
    depth = int(region.tail_layer.max()) if len(tails) else 0
    if depth <= _LAYERED_MAX_DEPTH:
        order = np.argsort(-region.tail_layer, kind="stable")
        tl = region.tail_layer[order]
        t_sorted, h_sorted = tails[order], heads[order]
        bounds = np.flatnonzero(np.diff(tl)) + 1
        for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(tl)]):
            np.minimum.at(cost, t_sorted[lo:hi], cost[h_sorted[lo:hi]])
        return
    order = np.argsort(-region.local_tails, kind="stable")
    c = cost.tolist()
    for t, h in zip(tails[order].tolist(), heads[order].tolist()):
        if c[h] < c[t]:
            c[t] = c[h]
    cost[:] = c


def _reach_from(reach: np.ndarray, region: _Region, edge_ok: np.ndarray) -> None:
    tails, heads = region.tails[edge_ok], region.heads[edge_ok]
    if len(tails) == 0:
        return
    tl = region.tail_layer[edge_ok]
    if int(tl.max()) <= _LAYERED_MAX_DEPTH:
        order = np.argsort(tl, kind="stable")
        tls = tl[order]
        t_sorted, h_sorted = tails[order], heads[order]
        bounds = np.flatnonzero(np.diff(tls)) + 1
        for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(tls)]):
            np.logical_or.at(reach, h_sorted[lo:hi], reach[t_sorted[lo:hi]])
        return
    order = np.argsort(region.local_tails[edge_ok], kind="stable")
    r = reach.tolist()
    for t, h in zip(tails[order].tolist(), heads[order].tolist()):
        if r[t]:
            r[h] = True
    reach[:] = r


def dp_bottom_up(g: EnumerationGraph) -> np.ndarray:
    """Lightest completion weight below every node (``inf`` where none exists).

    A relation node's completion is its own weight plus, for every child edge,
    the best option of its port; intermediate nodes and ports take the minimum
    over their out-edges. One pass over the edges, children before parents.
    """
    cost = np.full(g.n_nodes, INF)
    tree = g.tree
    by_child = {r.child: r for r in g.regions}
    for a in reversed(tree.order):
        base, n = g.rel_base[a], g.query.atoms[a].n
        total = g.weights[base:base + n].copy()
        for c in tree.children[a]:
            _min_into(cost, by_child[c])
            total += cost[g.port_base[c]:g.port_base[c] + n]
        cost[base:base + n] = total
    r = tree.root
    base, n = g.rel_base[r], g.query.atoms[r].n
    cost[g.root] = cost[base:base + n].min() if n else INF
    return cost


def prune_unreachable(g: EnumerationGraph) -> EnumerationGraph:
    """Drop nodes that cannot be completed below or reached from the root.

    The first condition is the bottom-up semi-join reduction; the second
    removes nodes no tree solution can use. The result is a fixpoint: running
    it again changes nothing. Also computes the sorted option lists.
    """
    cost = dp_bottom_up(g)
    finite = np.isfinite(cost)
    reach = np.zeros(g.n_nodes, dtype=bool)
    r = g.tree.root
    base, n = g.rel_base[r], g.query.atoms[r].n
    reach[base:base + n] = finite[base:base + n]
    by_child = {rg.child: rg for rg in g.regions}
    edge_alive = {}
    for c in g.tree.order:
        p = g.tree.parent[c]
        if p is None:
            continue
        region = by_child[c]
        pb, np_ = g.rel_base[p], g.query.atoms[p].n
        reach[g.port_base[c]:g.port_base[c] + np_] = reach[pb:pb + np_]
        ok = finite[region.heads] & finite[region.tails]
        _reach_from(reach, region, ok)
        edge_alive[c] = ok
    alive = reach & finite
    alive[g.root] = bool(alive[:g.n_rel].any())
    g.cost = cost
    g.alive = alive
    g.edge_alive = [edge_alive[rg.child] & alive[rg.tails] for rg in g.regions]
    _sort_options(g)
    return g


def _sort_options(g: EnumerationGraph) -> None:
    options: list[list[int] | None] = [None] * g.n_nodes
    option_costs: list[list[float] | None] = [None] * g.n_nodes
    cost = g.cost
    for region, ok in zip(g.regions, g.edge_alive):
        tails, heads = region.tails[ok], region.heads[ok]
        if len(tails) == 0:
            continue
        hc = cost[heads]
        order = np.lexsort((heads, hc, tails))
        tails, heads, hc = tails[order], heads[order], hc[order]
        starts = np.r_[0, np.flatnonzero(np.diff(tails)) + 1]
        ends = np.r_[starts[1:], len(tails)]
        hl, cl = heads.tolist(), hc.tolist()
        for t, lo, hi in zip(tails[starts].tolist(), starts.tolist(), ends.tolist()):
            options[t] = hl[lo:hi]
            option_costs[t] = cl[lo:hi]
    r = g.tree.root
    base, n = g.rel_base[r], g.query.atoms[r].n
    live = np.flatnonzero(g.alive[base:base + n]) + base
    rc = cost[live]
    order = np.lexsort((live, rc))
    options[g.root] = live[order].tolist()
    option_costs[g.root] = rc[order].tolist()
    g.options = options
    g.option_costs = option_costs


def build_graph(q: JoinQuery, method: str = "auto") -> tuple[EnumerationGraph, PlanResult]:
    """Plan ``q`` and assemble its pruned enumeration graph."""
    plan = assign_predicates(q)
    if plan.outcome is Outcome.NO_TREE:
        raise ValueError("query admits no theta-join tree")
    return assemble(q, plan.tree, method), plan
