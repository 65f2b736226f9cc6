"""Exception types shared across the package."""

from __future__ import annotations


class PriorMatchError(Exception):
    """Base class for all package-specific failures."""


class DomainError(PriorMatchError, ValueError):
    """An input value lies outside its mathematical domain."""


class FeasibilityError(PriorMatchError):
    """The requested target statistics cannot be produced by the model.

    ``violations`` holds ``(constraint, slack)`` pairs where ``constraint``
    is the inequality that must hold (written as ``expression > 0``) and
    ``slack`` is the signed value of the expression; a violated constraint
    has ``slack <= 0``.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        parts = [f"{name} violated by {slack:.6g}" for name, slack in self.violations]
        super().__init__("infeasible targets: " + "; ".join(parts))


class DataShapeError(PriorMatchError, ValueError):
    """A data matrix has unusable shape or degenerate content."""


class ModelSpecError(PriorMatchError):
    """A layered model description is invalid or unsupported."""


class GradientError(PriorMatchError):
    """A gradient evaluation produced a non-finite value.

    ``context`` carries the offending quantities (for gamma draws, the
    shape parameter and the sampled value).
    """

    def __init__(self, message, context=None):
        self.context = context
        super().__init__(message if context is None else f"{message}: {context}")


class EstimatorError(PriorMatchError):
    """A Monte Carlo estimator could not be formed (e.g. zero total mass)."""


class OptimizationError(PriorMatchError):
    """Stochastic optimization diverged.  Carries the last finite trace."""

    def __init__(self, message, trace=()):
        self.trace = tuple(trace)
        super().__init__(message)
