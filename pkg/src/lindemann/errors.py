"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class LindemannError(ValueError):
    """Base class for all domain errors raised by the package."""


class DenominatorZero(LindemannError):
    """The scalar slope field is singular (point on V or on the y-axis)."""


class PoleAtX(LindemannError):
    """An isocline is evaluated at its vertical asymptote."""


class PoleAtMinusOne(LindemannError):
    """K(c) requested for c = -1."""


class OutOfDomain(LindemannError):
    pass


class DegenerateRoots(LindemannError):
    """Cubic discriminant numerically zero; roots are not separable."""


class NonpositiveRate(LindemannError):
    pass


class SingularityApproached(LindemannError):
    """Scalar integration refused to start on (or too close to) V."""


class BracketViolation(LindemannError):
    pass


class SeamMismatch(LindemannError):
    pass


class Undecided(LindemannError):
    """Shooting classification did not exit the antifunnel within the span."""
