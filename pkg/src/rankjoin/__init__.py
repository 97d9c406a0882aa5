"""Ranked enumeration for theta-joins over factorized join graphs."""
from .errors import (GuardExceededError, InvalidPredicateError, RankJoinError,
                     ReductionUnsupportedError, SchemaError, UnsupportedMethodError)
from .model import (Answer, AtomicPredicate, AttrRef, Direction, JoinQuery, PredicateDNF,
                    PredKind, Relation, Tuple, band, eq, eval_atomic, eval_dnf, ge, gt, le, lt, neq)

__version__ = "0.1.0"
