"""Exception hierarchy for mottlind.

All package-specific failures derive from :class:`MottlindError` so callers
can distinguish physics/consistency failures from ordinary Python errors.
Plain argument misuse (wrong types, negative times, malformed matrices)
raises the built-in ``ValueError``/``TypeError`` as usual.
"""

from __future__ import annotations


class MottlindError(Exception):
    """Base class for all mottlind-specific errors."""


class ConfigurationError(MottlindError):
    """Invalid model parameters or run configuration."""


class SiteError(MottlindError):
    """A site is missing, unoccupied, or inconsistent with an operator."""


class DegenerateNormalizationError(MottlindError):
    """The hopping normalization sum is empty (no donor sites to sum over)."""


class ConsistencyError(MottlindError):
    """Two independent evaluation paths of the same quantity disagree."""


class AxiomViolationError(MottlindError):
    """A structural axiom of the jump catalogue fails beyond tolerance."""

    def __init__(self, axiom: str, deviation: float, tolerance: float) -> None:
        self.axiom = axiom
        self.deviation = deviation
        self.tolerance = tolerance
        super().__init__(
            f"axiom {axiom} violated: deviation {deviation:.3e} "
            f"exceeds tolerance {tolerance:.3e}"
        )


class BoundDivergenceError(MottlindError):
    """A convergence-bound parameter makes the bounding series diverge."""


class SizeError(MottlindError):
    """The requested object exceeds the configured exact-diagonalization cap."""


class OptimizationError(MottlindError):
    """A numerical optimizer failed to bracket or converge to an optimum."""
