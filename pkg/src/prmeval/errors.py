"""Exception and warning types shared across the package."""

from __future__ import annotations


class PrmError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PrmError):
    """A line of an input file could not be decoded."""


class ValidationError(PrmError):
    """Decoded input violates a structural invariant."""


class EstimationError(PrmError):
    """Disagreement parameters cannot be estimated from the given pairs."""


class MetricError(PrmError):
    """A metric cannot be computed (undefined gains, empty pools, ...)."""


class DataWarning(UserWarning):
    """Non-fatal data anomaly: value accepted, but worth flagging."""
