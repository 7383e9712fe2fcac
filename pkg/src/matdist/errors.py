"""
Exception hierarchy shared by all matdist modules.
"""

from typing import Any, Optional


class MatdistError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(MatdistError):
    """Run configuration is malformed or inconsistent."""


class LawNotFoundError(MatdistError, KeyError):
    """Requested constitutive law is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "law not found"


class DomainError(MatdistError):
    """(t, x, F) lies outside the domain of a constitutive law."""


class NonFiniteError(MatdistError):
    """A constitutive law returned NaN or Inf."""


class RankUnstableError(MatdistError):
    """Numerical rank could not be decided with the configured tolerances."""

    def __init__(self, message: str, variant: Optional[str] = None):
        if variant is not None:
            message = f"{variant}: {message}"
        super().__init__(message)
        self.variant = variant


class UnderdeterminedError(MatdistError, ValueError):
    """Too few F samples to determine a kernel variant."""


class SearchFailedError(MatdistError):
    """Isomorphism search failure carrying its best candidate."""

    def __init__(self, message: str, best_residual: float, best_P: Any = None):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.best_P = best_P


class IsomorphismNotFoundError(SearchFailedError):
    """No material isomorphism was found between two points."""


class NonConvergedError(SearchFailedError):
    """Search ended with a residual in the ambiguous band."""


class TraceAbortedError(MatdistError):
    """Leaf trace aborted; the partial trace is attached."""

    def __init__(self, message: str, trace: Any = None):
        super().__init__(message)
        self.trace = trace


class SingularCrossingError(TraceAbortedError):
    """Distribution dimension changed along a leaf trace."""


class DomainExitError(TraceAbortedError):
    """Leaf trace left the law's domain box."""


class NoLeafError(MatdistError):
    """Projected fiber is zero-dimensional at the seed, nothing to trace."""


class InvalidTraceError(MatdistError, ValueError):
    """Leaf trace requested with a bad step or direction."""


class InvalidProcessError(MatdistError, ValueError):
    """Remodeling process violates its invariants."""


class MissingDensityError(MatdistError):
    """Mass consistency requested for a process without density samples."""


class SingularPError(MatdistError):
    """A remodeling matrix P(t) is numerically singular."""


class IncompleteSweepError(MatdistError):
    """Classification requested on a sweep with failed points."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report
