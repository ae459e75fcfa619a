"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ThinCarpetError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ThinCarpetError):
    pass


class NotCongruent(ThinCarpetError):
    pass


class InvalidFactor(ThinCarpetError):
    pass


class InvalidFactorDimension(ThinCarpetError):
    pass


class InvalidSpec(ThinCarpetError):
    pass


class InvalidWord(ThinCarpetError):
    pass


class InvalidParameter(ThinCarpetError):
    pass


class DegenerateMass(ThinCarpetError):
    """A box that must carry positive mass carries none."""


class EnumerationBudget(ThinCarpetError):
    """Raised when an enumeration would exceed the configured box budget.

    ``count`` is the number of items the request would have produced and
    ``partial`` carries whatever was computed before the limit was hit.
    """

    def __init__(self, message: str, count: int | None = None, partial=None):
        super().__init__(message)
        self.count = count
        self.partial = partial


class DisjointnessViolation(ThinCarpetError):
    """Internal-consistency failure: harvested holes overlap."""


class NonConvergence(ThinCarpetError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(ThinCarpetError):
    pass
