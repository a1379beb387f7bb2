"""Exception types raised by the package."""


class MTAError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MTAError, ValueError):
    """Caller supplied data that violates a documented precondition."""


class InvalidSimilarityError(InvalidInputError):
    """A similarity matrix has a negative or non-finite entry."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DimensionError(InvalidInputError):
    """Array shapes do not agree."""


class InternalError(MTAError, RuntimeError):
    """A numerical invariant that holds for all valid inputs was violated.

    Seeing this means a bug in the package, not bad input.
    """
