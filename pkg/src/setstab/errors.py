"""Exception types shared across the package."""

from __future__ import annotations


class SetStabError(Exception):
    """Base class for all errors raised by setstab."""


class UniverseMismatch(SetStabError, ValueError):
    """Two objects that must live on the same universe do not."""


class EmptyFamilyError(SetStabError, ValueError):
    """Families of subsets must be nonempty."""


class EnumerationRefused(SetStabError):
    """An exact check would have to enumerate more sets than the ceiling allows."""

    def __init__(self, needed: int, ceiling: int, what: str = "subsets"):
        self.needed = needed
        self.ceiling = ceiling
        super().__init__(f"enumeration refused: {needed} {what} exceed ceiling {ceiling}")


class VerdictError(SetStabError):
    """An error that carries the verdict explaining it."""

    def __init__(self, message: str, verdict=None):
        self.verdict = verdict
        super().__init__(message)


class AxiomViolation(VerdictError, ValueError):
    """A family declared (or required) to be a filter/ideal is not one."""


class HypothesisViolation(VerdictError):
    """A theorem's hypotheses do not hold for the supplied instance."""


class NotGloballyStable(VerdictError):
    pass


class IncompatibleFamilies(VerdictError):
    pass


class NoOntoAlpha(VerdictError):
    """No onto assignment of the intersection families satisfies the bound."""


class NotDirected(VerdictError, ValueError):
    """A family that must be upward directed (or union-closed) is not."""


class UncoveredPoint(SetStabError, KeyError):
    pass
