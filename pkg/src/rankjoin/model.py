"""Relations, predicates and join queries.

Everything here is immutable after construction. Attribute values and weights
are stored as Python floats; integer data round-trips exactly up to 2**53.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import SchemaError, InvalidPredicateError


class Direction(enum.Enum):
    MIN = "min"
    MAX = "max"


class PredKind(enum.Enum):
    EQ = "="
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    NEQ = "!="
    BAND = "band"

    @property
    def flipped(self) -> PredKind:
        """Kind obtained by swapping the two sides of the predicate."""
        return _FLIP.get(self, self)


_FLIP = {
    PredKind.LT: PredKind.GT,
    PredKind.GT: PredKind.LT,
    PredKind.LE: PredKind.GE,
    PredKind.GE: PredKind.LE,
}

INEQUALITIES = frozenset({PredKind.LT, PredKind.GT, PredKind.LE, PredKind.GE})


@dataclass(frozen=True)
class Tuple:
    values: tuple[float, ...]
    weight: float
    tid: int


class Relation:
    """A named table of numeric rows, one weight per row.

    Rows are addressed by their tid, which is the row position.
    """

    def __init__(self, name: str, attributes: Sequence[str],
                 rows: Iterable[Sequence[float]], weights: Iterable[float] | None = None):
        self.name = name
        self.attributes = tuple(attributes)
        if len(set(self.attributes)) != len(self.attributes):
            raise SchemaError(f"duplicate attribute names in relation {name}")
        self.rows = [tuple(float(v) for v in r) for r in rows]
        arity = len(self.attributes)
        for r in self.rows:
            if len(r) != arity:
                raise SchemaError(f"row {r} does not match arity {arity} of {name}")
        if weights is None:
            self.weights = [0.0] * len(self.rows)
        else:
            self.weights = [float(w) for w in weights]
            if len(self.weights) != len(self.rows):
                raise SchemaError(f"{name}: {len(self.weights)} weights for {len(self.rows)} rows")
        self._index = {a: i for i, a in enumerate(self.attributes)}

    @property
    def n(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, tid: int) -> Tuple:
        return Tuple(self.rows[tid], self.weights[tid], tid)

    def __iter__(self):
        for tid in range(len(self.rows)):
            yield self[tid]

    def __repr__(self) -> str:
        return f"Relation({self.name!r}, {list(self.attributes)}, n={self.n})"

    def position(self, attribute: str) -> int:
        try:
            return self._index[attribute]
        except KeyError:
            raise SchemaError(f"relation {self.name} has no attribute {attribute!r}") from None

    def column(self, attribute: str) -> list[float]:
        i = self.position(attribute)
        return [r[i] for r in self.rows]

    def copy(self, name: str) -> Relation:
        """Copy under a new name; used to expand self-joins."""
        return Relation(name, self.attributes, self.rows, self.weights)

    def negated(self) -> Relation:
        return Relation(self.name, self.attributes, self.rows, [-w for w in self.weights])


@dataclass(frozen=True)
class AttrRef:
    """``relation.attribute``, optionally under the affine map ``scale * x + offset``."""

    relation: str
    attribute: str
    scale: float = 1.0
    offset: float = 0.0

    @classmethod
    def parse(cls, text: str | AttrRef) -> AttrRef:
        if isinstance(text, AttrRef):
            return text
        rel, sep, attr = text.partition(".")
        if not sep or not rel or not attr:
            raise SchemaError(f"attribute reference must look like Rel.Attr, got {text!r}")
        return cls(rel, attr)

    @property
    def is_plain(self) -> bool:
        return self.scale == 1.0 and self.offset == 0.0

    def values(self, rel: Relation) -> list[float]:
        col = rel.column(self.attribute)
        if self.is_plain:
            return col
        return [self.scale * v + self.offset for v in col]

    def __str__(self) -> str:
        base = f"{self.relation}.{self.attribute}"
        if self.is_plain:
            return base
        return f"({self.scale:g}*{base}{self.offset:+g})"


COMPARATORS = {
    PredKind.EQ: lambda a, b: a == b,
    PredKind.LT: lambda a, b: a < b,
    PredKind.GT: lambda a, b: a > b,
    PredKind.LE: lambda a, b: a <= b,
    PredKind.GE: lambda a, b: a >= b,
    PredKind.NEQ: lambda a, b: a != b,
}


@dataclass(frozen=True)
class AtomicPredicate:
    kind: PredKind
    left: AttrRef
    right: AttrRef
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind is PredKind.BAND:
            if self.epsilon is None or not self.epsilon > 0 or math.isinf(self.epsilon):
                raise InvalidPredicateError(f"band predicate needs a finite epsilon > 0, got {self.epsilon}")
        elif self.epsilon is not None:
            raise InvalidPredicateError(f"epsilon is only allowed on band predicates, not {self.kind.name}")
        if self.left.relation == self.right.relation:
            raise InvalidPredicateError(
                f"predicate {self} compares two attributes of the same relation {self.left.relation}")

    @property
    def relations(self) -> frozenset[str]:
        return frozenset((self.left.relation, self.right.relation))

    def flipped(self) -> AtomicPredicate:
        return AtomicPredicate(self.kind.flipped, self.right, self.left, self.epsilon)

    def oriented(self, left_relation: str) -> AtomicPredicate:
        """Same predicate with ``left`` referring to ``left_relation``."""
        if self.left.relation == left_relation:
            return self
        if self.right.relation == left_relation:
            return self.flipped()
        raise SchemaError(f"predicate {self} does not reference {left_relation}")

    def test(self, a: float, b: float) -> bool:
        if self.kind is PredKind.BAND:
            return abs(a - b) < self.epsilon
        return COMPARATORS[self.kind](a, b)

    def __str__(self) -> str:
        if self.kind is PredKind.BAND:
            return f"|{self.left} - {self.right}| < {self.epsilon:g}"
        return f"{self.left} {self.kind.value} {self.right}"


def eq(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.EQ, AttrRef.parse(left), AttrRef.parse(right))


def lt(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.LT, AttrRef.parse(left), AttrRef.parse(right))


def gt(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.GT, AttrRef.parse(left), AttrRef.parse(right))


def le(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.LE, AttrRef.parse(left), AttrRef.parse(right))


def ge(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.GE, AttrRef.parse(left), AttrRef.parse(right))


def neq(left: str, right: str) -> AtomicPredicate:
    return AtomicPredicate(PredKind.NEQ, AttrRef.parse(left), AttrRef.parse(right))


def band(left: str, right: str, epsilon: float) -> AtomicPredicate:
    return AtomicPredicate(PredKind.BAND, AttrRef.parse(left), AttrRef.parse(right), float(epsilon))


Conjunction = tuple[AtomicPredicate, ...]


@dataclass(frozen=True)
class PredicateDNF:
    """A disjunction of conjunctions of atomic predicates over one pair of relations."""

    disjuncts: tuple[Conjunction, ...]

    def __post_init__(self):
        disjuncts = tuple(tuple(c) for c in self.disjuncts)
        object.__setattr__(self, "disjuncts", disjuncts)
        if not disjuncts or any(not c for c in disjuncts):
            raise InvalidPredicateError("a DNF needs at least one disjunct and no empty conjunctions")
        pairs = {a.relations for c in disjuncts for a in c}
        if len(pairs) != 1:
            names = sorted({r for p in pairs for r in p})
            raise SchemaError(f"predicate spans more than two relations: {names}")

    @classmethod
    def of(cls, *atoms: AtomicPredicate) -> PredicateDNF:
        """A single conjunction."""
        return cls((tuple(atoms),))

    @classmethod
    def any_of(cls, *conjunctions: Sequence[AtomicPredicate] | AtomicPredicate) -> PredicateDNF:
        return cls(tuple((c,) if isinstance(c, AtomicPredicate) else tuple(c) for c in conjunctions))

    @property
    def relations(self) -> frozenset[str]:
        return self.disjuncts[0][0].relations

    @property
    def p(self) -> int:
        """Largest number of non-equality atoms in one conjunction."""
        return max(sum(a.kind is not PredKind.EQ for a in c) for c in self.disjuncts)

    @property
    def size(self) -> int:
        return sum(len(c) for c in self.disjuncts)

    @property
    def is_equi(self) -> bool:
        """True for a single conjunction of equalities."""
        return len(self.disjuncts) == 1 and self.p == 0

    @property
    def atoms(self) -> list[AtomicPredicate]:
        return [a for c in self.disjuncts for a in c]

    def oriented(self, left_relation: str) -> PredicateDNF:
        return PredicateDNF(tuple(tuple(a.oriented(left_relation) for a in c) for c in self.disjuncts))

    def and_(self, other: PredicateDNF) -> PredicateDNF:
        """Conjunction of two DNFs over the same relation pair, distributed back into DNF."""
        return PredicateDNF(tuple(a + b for a, b in itertools.product(self.disjuncts, other.disjuncts)))

    def __str__(self) -> str:
        parts = [" AND ".join(str(a) for a in c) for c in self.disjuncts]
        if len(parts) == 1:
            return parts[0]
        return " OR ".join(f"({p})" for p in parts)


def _value(ref: AttrRef, rel: Relation, row: Sequence[float]) -> float:
    v = row[rel.position(ref.attribute)]
    return ref.scale * v + ref.offset


def _resolve(pred: AtomicPredicate, s_rel: Relation, t_rel: Relation) -> AtomicPredicate:
    if pred.left.relation == s_rel.name and pred.right.relation == t_rel.name:
        return pred
    if pred.right.relation == s_rel.name and pred.left.relation == t_rel.name:
        return pred.flipped()
    raise SchemaError(f"predicate {pred} does not relate {s_rel.name} and {t_rel.name}")


def eval_atomic(pred: AtomicPredicate, s_rel: Relation, s: Tuple | int,
                t_rel: Relation, t: Tuple | int) -> bool:
    """Truth of ``pred`` on tuple ``s`` of ``s_rel`` and ``t`` of ``t_rel``.

    Tuples may be given as :class:`Tuple` or as tids.
    """
    pred = _resolve(pred, s_rel, t_rel)
    srow = s_rel.rows[s] if isinstance(s, int) else s.values
    trow = t_rel.rows[t] if isinstance(t, int) else t.values
    return pred.test(_value(pred.left, s_rel, srow), _value(pred.right, t_rel, trow))


def eval_dnf(dnf: PredicateDNF, s_rel: Relation, s: Tuple | int,
             t_rel: Relation, t: Tuple | int) -> bool:
    return any(all(eval_atomic(a, s_rel, s, t_rel, t) for a in conj) for conj in dnf.disjuncts)


@dataclass(frozen=True)
class Answer:
    """One join answer: a tid per query atom (in query order) and its weight."""

    choice: tuple[int, ...]
    weight: float


@dataclass
class JoinQuery:
    """A full theta-join query.

    ``atoms`` are distinct relations (self-joins must be expanded into copies
    beforehand). Shared variables are written as equality predicates.
    """

    atoms: list[Relation]
    predicates: list[PredicateDNF] = field(default_factory=list)
    direction: Direction = Direction.MIN

    def __post_init__(self):
        if not self.atoms:
            raise SchemaError("a query needs at least one atom")
        names = [r.name for r in self.atoms]
        if len(set(names)) != len(names):
            raise SchemaError(f"relation names must be distinct (copy self-joined relations): {names}")
        self._by_name = {r.name: r for r in self.atoms}
        self._pos = {r.name: i for i, r in enumerate(self.atoms)}
        for dnf in self.predicates:
            for a in dnf.atoms:
                for ref in (a.left, a.right):
                    rel = self.relation(ref.relation)
                    rel.position(ref.attribute)

    @property
    def ell(self) -> int:
        return len(self.atoms)

    @property
    def q(self) -> int:
        return sum(d.size for d in self.predicates)

    def relation(self, name: str) -> Relation:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None

    def index(self, name: str) -> int:
        return self._pos[name]

    def answer_weight(self, choice: Sequence[int]) -> float:
        """Sum of the chosen tuples' weights (original, un-negated weights)."""
        if len(choice) != self.ell:
            raise SchemaError(f"expected {self.ell} tids, got {len(choice)}")
        total = 0.0
        for rel, tid in zip(self.atoms, choice):
            if not 0 <= tid < rel.n:
                raise IndexError(f"tid {tid} out of range for {rel.name} (n={rel.n})")
            total += rel.weights[tid]
        return total

    def satisfies(self, choice: Sequence[int], predicates: Sequence[PredicateDNF] | None = None) -> bool:
        preds = self.predicates if predicates is None else predicates
        for dnf in preds:
            a, b = sorted(dnf.relations)
            ra, rb = self.relation(a), self.relation(b)
            if not eval_dnf(dnf, ra, choice[self._pos[a]], rb, choice[self._pos[b]]):
                return False
        return True

    def ranking_view(self) -> JoinQuery:
        """The query the engine minimizes: weights negated under MAX ranking."""
        if self.direction is Direction.MIN:
            return self
        return JoinQuery([r.negated() for r in self.atoms], self.predicates, Direction.MIN)


def answer_weight(q: JoinQuery, choice: Sequence[int]) -> float:
    return q.answer_weight(choice)
