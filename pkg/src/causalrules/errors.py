"""Exception types shared across the package."""

from __future__ import annotations


class CausalRulesError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CausalRulesError):
    """Invalid input data, schema, or configuration."""


class FitError(CausalRulesError):
    """A model fit could not be completed."""


class SeparationError(FitError):
    """Perfect or quasi-perfect separation: the MLE diverges.

    Carries the offending feature (and treatment level for multinomial
    fits) so callers can report which cell is degenerate.
    """

    def __init__(self, message: str, feature: str | None = None, level: int | None = None):
        super().__init__(message)
        self.feature = feature
        self.level = level


class SingularInformationError(FitError):
    """The information matrix is singular (collinear design)."""


class ConvergenceError(FitError):
    """An iterative fit did not converge within its iteration budget.

    ``trace`` holds the per-iteration diagnostic (gradient norms or
    fluctuation epsilons) for post-mortem inspection.
    """

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class RuleInfeasibleError(CausalRulesError):
    """A rule could not assign a treatment level for some rows.

    ``rows`` lists (a prefix of) the offending row indices.
    """

    def __init__(self, message: str, rows: list[int] | None = None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []


class EstimationError(CausalRulesError):
    """Estimation failed (zero denominators, degenerate targets, ...)."""
