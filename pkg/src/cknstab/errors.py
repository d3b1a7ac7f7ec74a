"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CknError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(CknError, ValueError):
    """Malformed or non-finite input."""


class UnsupportedRegime(CknError):
    """Parameters do not match any supported theorem regime."""


class RegimeMismatch(CknError):
    """An object was used with parameters of a different regime."""


class NumericalFailure(CknError):
    """Base for failures of the numerical machinery (exit code 2)."""


class NonConvergence(NumericalFailure):
    pass


class SingularEndpoint(NumericalFailure):
    """The integrand is not integrable at 0 or at infinity."""


class InvalidBracket(CknError, ValueError):
    pass


class ZeroDenominator(NumericalFailure):
    pass


class BoundaryHit(NumericalFailure):
    """An optimizer pinned the scale parameter at the edge of its search box."""


class BadSamples(InvalidInput):
    pass


class MissingSecondDerivative(InvalidInput):
    pass
