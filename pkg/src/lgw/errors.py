"""Exception types shared across the package."""


class LgwError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LgwError, ValueError):
    """Array shapes are inconsistent with the declared problem."""


class InvalidInput(LgwError, ValueError):
    """A parameter is outside its admissible domain (nonpositive, NaN, ...)."""


class InvalidRegime(LgwError, ValueError):
    """Inputs violate the validity regime of a closed-form bound."""


class EmptyIntersection(LgwError):
    """The localized constraint set is empty: min of Q over the simplex exceeds s^2."""


class NonConvergence(LgwError):
    """An iterative solver exhausted its caps.

    Carries the best iterate found so far in ``best`` so callers can degrade
    gracefully instead of losing the work.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CapExceeded(LgwError):
    """An enumeration would exceed the caller-supplied cardinality cap."""


class BoundNotMet(LgwError):
    """No sampled draw satisfied the target bound within the trial budget.

    Carries the best draw and its certificate in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SignSearchExhausted(LgwError):
    """Rademacher sign search failed to find an admissible signing."""


class NoCrossing(LgwError):
    """Bisection bracket does not contain the fixed-point crossing."""
