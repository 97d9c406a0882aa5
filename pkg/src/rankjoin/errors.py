class RankJoinError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(RankJoinError):
    """An attribute, relation or tid does not resolve."""


class InvalidPredicateError(RankJoinError):
    """A predicate is malformed (e.g. a band with a non-positive epsilon)."""


class UnsupportedMethodError(RankJoinError):
    """The requested factorization method cannot encode the join condition."""


class ReductionUnsupportedError(RankJoinError):
    """A TLFG has edges that skip layers, so it cannot be turned into an equi-join."""


class GuardExceededError(RankJoinError):
    """A materializing baseline or oracle would exceed its size or time budget."""
