"""Shared exception types.

Kept in one place so the CLI can map them to exit codes without importing
every subsystem: validation problems (bad definitions, mismatched charts,
spec files that do not parse) are distinct from runtime domain problems
(points outside a chart, singular evaluations, bump supports that escape).
"""

from __future__ import annotations

__all__ = [
    "DivkitError",
    "ValidationError",
    "ChartMismatch",
    "DomainError",
    "SupportError",
    "SpecError",
]


class DivkitError(Exception):
    """Base class for package-level failures."""


class ValidationError(DivkitError):
    """A definition violates its contract (non-positive density, asymmetric
    metric, wrong component count, ...)."""


class ChartMismatch(ValidationError):
    """Objects from different charts were combined."""


class DomainError(DivkitError):
    """A runtime point left the chart domain or hit a singularity."""


class SupportError(DomainError):
    """A compactly supported field's support is not strictly inside the
    chart, or the field fails to vanish on the boundary."""


class SpecError(DivkitError):
    """Problem in a problem-description file; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
