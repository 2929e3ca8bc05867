"""Exception hierarchy shared across the package.

Every error raised on purpose derives from SibuyaLabError so callers (and the
CLI) can map failures to exit codes: parameter/domain problems, unsupported
operations, and numeric non-convergence form three disjoint branches.
"""


class SibuyaLabError(Exception):
    """Base class for all package errors."""


# -- parameter / domain problems (CLI exit code 1) --------------------------

class ParameterError(SibuyaLabError, ValueError):
    """A distribution parameter violates its documented constraint."""


class DomainError(SibuyaLabError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class RateError(SibuyaLabError, ValueError):
    """A birth-death rate is negative or undefined on the required range."""


class NegativeAmplitudeError(SibuyaLabError, ValueError):
    """An elementary amplitude mapping produced a negative coefficient."""


class NotDecreasingError(SibuyaLabError, ValueError):
    """A pmf required to be strictly decreasing is not."""


class PmfInvariantError(SibuyaLabError, ValueError):
    """A pmf table violates its invariants (negativity, normalization)."""


class InversionError(SibuyaLabError, ValueError):
    """A power series cannot be inverted (vanishing linear coefficient)."""


class InfiniteMomentError(SibuyaLabError, ValueError):
    """A requested moment does not exist for the given family."""


class NoRootError(SibuyaLabError, ValueError):
    """A bracketed root search has no root in the admissible region."""


# -- unsupported operations (CLI exit code 2) --------------------------------

class UnsupportedError(SibuyaLabError):
    """The family does not support the requested operation."""


class ScalingError(UnsupportedError):
    """Thinning with a > 1 requested for a family without a Laplace-mixture
    representation."""


class TailModelError(UnsupportedError):
    """A power-law tail model could not be fitted for tail sampling."""


# -- numeric non-convergence (CLI exit code 3) --------------------------------

class NumericError(SibuyaLabError):
    """Base class for numeric failures."""


class ConvergenceError(NumericError):
    """Successive refinements failed to agree within tolerance."""


class QuadratureError(NumericError):
    """Adaptive quadrature did not converge."""


class SeriesDivergenceError(NumericError):
    """A series kept growing past its term budget."""


class DivergenceError(NumericError):
    """A candidate stationary law is not normalizable."""


class DivisionInstabilityError(NumericError):
    """Power-series division is numerically unstable (near-zero leading
    denominator coefficient)."""


class NumericalUnderflowError(NumericError):
    """Values left the representable range and no log-space path exists."""


class ExplosionError(NumericError):
    """A simulated trajectory spent too much time at the state cap."""


class BudgetError(NumericError):
    """Too many simulation replicas exhausted their node budget."""
