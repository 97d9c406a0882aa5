"""Theta-join trees: GYO acyclicity test, predicate placement and rooting."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

from .errors import SchemaError
from .model import AtomicPredicate, AttrRef, JoinQuery, PredicateDNF, PredKind, eval_dnf


class Outcome(enum.Enum):
    ACYCLIC = "acyclic"
    CYCLIC = "cyclic"
    NO_TREE = "no_tree"


@dataclass
class ThetaJoinTree:
    """A rooted join tree over query atoms (by index) with one condition per edge.

    ``parent[i]`` is the parent atom of atom ``i`` (``None`` for the root);
    ``conditions[i]`` is the condition between ``parent[i]`` (left side) and
    ``i`` (right side), or ``None`` for a cross product edge.
    """

    root: int
    parent: list[int | None]
    children: list[list[int]]
    conditions: list[PredicateDNF | None]
    order: list[int]  # depth-first preorder
    depth: list[int]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(self.parent[c], c) for c in self.order if self.parent[c] is not None]


@dataclass
class PlanResult:
    outcome: Outcome
    tree: ThetaJoinTree | None = None
    residual: list[PredicateDNF] = field(default_factory=list)
    # index into JoinQuery.predicates for each residual entry
    residual_indices: list[int] = field(default_factory=list)


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra
            return True
        return False


def _split_predicates(q: JoinQuery, active: list[int]):
    """Separate equality skeleton (variable identifications) from theta predicates."""
    equis, thetas = [], []
    for i in active:
        dnf = q.predicates[i]
        if dnf.is_equi and all(a.left.is_plain and a.right.is_plain for a in dnf.atoms):
            equis.append(i)
        else:
            thetas.append(i)
    return equis, thetas


def _variable_classes(q: JoinQuery, equis: list[int]) -> list[frozenset]:
    """Hyperedge (set of shared variable ids) for every atom."""
    uf = _UnionFind()
    for i in equis:
        for a in q.predicates[i].atoms:
            uf.union((a.left.relation, a.left.attribute), (a.right.relation, a.right.attribute))
    members: dict = {}
    for key in list(uf.parent):
        members.setdefault(uf.find(key), set()).add(key)
    edges = []
    for rel in q.atoms:
        vs = set()
        for attr in rel.attributes:
            key = (rel.name, attr)
            if key in uf.parent:
                root = uf.find(key)
                if sum(1 for (r, _) in members[root] if r == rel.name) > 1:
                    raise SchemaError(f"equalities force two attributes of {rel.name} to be equal")
                vs.add(root)
        edges.append(frozenset(vs))
    return edges


def gyo_reduce(hyperedges: list[frozenset]) -> list[tuple[int, int]] | None:
    """GYO ear removal over atom hyperedges.

    Returns join-tree edges ``(ear, witness)`` or ``None`` when the hypergraph
    is cyclic. Ears are removed lowest index first and take the lowest-index
    witness; disconnected components are chained together with cross-product
    edges so the result is always a single tree.
    """
    alive = list(range(len(hyperedges)))
    edges: list[tuple[int, int]] = []
    while len(alive) > 1:
        for e in alive:
            others = [f for f in alive if f != e]
            shared = set()
            for f in others:
                shared |= hyperedges[e] & hyperedges[f]
            witness = next((f for f in others if shared <= hyperedges[f]), None)
            if witness is not None:
                edges.append((e, witness))
                alive.remove(e)
                break
        else:
            return None
    return edges


def gyo_join_tree(q: JoinQuery) -> list[tuple[int, int]] | None:
    """Join tree of the query's equi-join skeleton (all theta predicates removed)."""
    equis, _ = _split_predicates(q, list(range(len(q.predicates))))
    return gyo_reduce(_variable_classes(q, equis))


def _is_join_tree(hyperedges, edges, n) -> bool:
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    variables = set().union(*hyperedges) if hyperedges else set()
    for v in variables:
        holders = {i for i in range(n) if v in hyperedges[i]}
        start = next(iter(holders))
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y in holders and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != holders:
            return False
    return True


def _tree_with_required(hyperedges, required: set[frozenset]) -> list[tuple[int, int]] | None:
    """A join tree containing every required atom pair, if one exists.

    Join trees of an acyclic hypergraph are exactly the maximum-weight spanning
    trees of the atom graph weighted by shared-variable counts, so Kruskal with
    the required pairs forced first finds one whenever any exists.
    """
    n = len(hyperedges)
    uf = _UnionFind()
    edges = []
    for pair in sorted(tuple(sorted(p)) for p in required):
        if not uf.union(*pair):
            return None
        edges.append(pair)
    cand = sorted(((-len(hyperedges[a] & hyperedges[b]), a, b)
                   for a, b in itertools.combinations(range(n), 2)))
    for _, a, b in cand:
        if uf.union(a, b):
            edges.append((a, b))
    if not _is_join_tree(hyperedges, edges, n):
        return None
    return edges


def root_tree(n: int, edges: list[tuple[int, int]],
              conditions: dict[frozenset, PredicateDNF | None] | None = None,
              names: list[str] | None = None) -> ThetaJoinTree:
    """Root an undirected tree at atom 0; children and traversal in atom-index order."""
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent: list[int | None] = [None] * n
    children: list[list[int]] = [[] for _ in range(n)]
    depth = [0] * n
    order = []
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        order.append(x)
        kids = sorted(y for y in adj[x] if y not in seen)
        for y in kids:
            seen.add(y)
            parent[y] = x
            depth[y] = depth[x] + 1
        children[x] = kids
        stack.extend(reversed(kids))
    if len(order) != n:
        raise ValueError("edges do not form a spanning tree")
    conds: list[PredicateDNF | None] = [None] * n
    if conditions:
        for c in range(n):
            p = parent[c]
            if p is not None:
                dnf = conditions.get(frozenset((p, c)))
                if dnf is not None and names is not None:
                    dnf = dnf.oriented(names[p])
                conds[c] = dnf
    return ThetaJoinTree(0, parent, children, conds, order, depth)


def _edge_conditions(q: JoinQuery, hyperedges, edges, thetas: list[int], equis: list[int]):
    """Condition per tree edge: implied equalities on shared variables plus assigned thetas."""
    # attribute holding each variable, per atom
    uf = _UnionFind()
    for i in equis:
        for a in q.predicates[i].atoms:
            uf.union((a.left.relation, a.left.attribute), (a.right.relation, a.right.attribute))
    holder: dict[tuple[int, object], str] = {}
    for ai, rel in enumerate(q.atoms):
        for attr in rel.attributes:
            key = (rel.name, attr)
            if key in uf.parent:
                holder[(ai, uf.find(key))] = attr
    conds: dict[frozenset, PredicateDNF | None] = {}
    for a, b in edges:
        shared = sorted(hyperedges[a] & hyperedges[b], key=repr)
        dnf = None
        if shared:
            ra, rb = q.atoms[a].name, q.atoms[b].name
            dnf = PredicateDNF.of(*[
                AtomicPredicate(PredKind.EQ, AttrRef(ra, holder[(a, v)]), AttrRef(rb, holder[(b, v)]))
                for v in shared])
        conds[frozenset((a, b))] = dnf
    for i in thetas:
        theta = q.predicates[i]
        pair = frozenset(q.index(r) for r in theta.relations)
        cur = conds[pair]
        conds[pair] = theta if cur is None else cur.and_(theta)
    return conds


def _try_plan(q: JoinQuery, active: list[int]) -> ThetaJoinTree | None:
    equis, thetas = _split_predicates(q, active)
    hyperedges = _variable_classes(q, equis)
    if gyo_reduce(hyperedges) is None:
        return None
    required = {frozenset(q.index(r) for r in q.predicates[i].relations) for i in thetas}
    edges = _tree_with_required(hyperedges, required)
    if edges is None:
        return None
    conds = _edge_conditions(q, hyperedges, edges, thetas, equis)
    return root_tree(q.ell, edges, conds, [r.name for r in q.atoms])


def assign_predicates(q: JoinQuery) -> PlanResult:
    """Build a theta-join tree for ``q``, dropping predicates into a residual if needed.

    The residual is the smallest set of predicates whose removal makes the
    remaining query acyclic. Among equally small sets, earlier predicates are
    kept in preference to later ones.
    """
    idx = list(range(len(q.predicates)))
    for r in range(len(idx) + 1):
        for dropped in itertools.combinations(reversed(idx), r):
            dropped = tuple(sorted(dropped))
            active = [i for i in idx if i not in dropped]
            tree = _try_plan(q, active)
            if tree is not None:
                if not dropped:
                    return PlanResult(Outcome.ACYCLIC, tree)
                return PlanResult(Outcome.CYCLIC, tree,
                                  [q.predicates[i] for i in dropped], list(dropped))
    return PlanResult(Outcome.NO_TREE)


plan_query = assign_predicates


def tree_satisfies(q: JoinQuery, tree: ThetaJoinTree, choice) -> bool:
    """Evaluate an answer candidate through the tree's edge conditions."""
    for c in range(q.ell):
        p = tree.parent[c]
        if p is None or tree.conditions[c] is None:
            continue
        if not eval_dnf(tree.conditions[c], q.atoms[p], choice[p], q.atoms[c], choice[c]):
            return False
    return True
