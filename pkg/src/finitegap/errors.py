"""Exception and warning types shared across the package."""


class FiniteGapError(Exception):
    """Base class for all package errors."""


class InvalidMatrixError(FiniteGapError, ValueError):
    """Matrix is not symmetric or its imaginary part is not positive definite."""


class ParameterError(FiniteGapError, ValueError):
    """A numerical parameter is out of its admissible range."""


class PrecisionError(FiniteGapError, ArithmeticError):
    """A numerical procedure did not reach the requested accuracy.

    ``achieved`` carries the best error estimate that was reached.
    """

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class SingularCurveError(FiniteGapError, ValueError):
    """The polynomial defining the curve has a repeated root."""


class UnsupportedGenusError(FiniteGapError, ValueError):
    """The polynomial degree does not define a curve of genus >= 1."""


class UnsupportedConfigurationError(FiniteGapError, ValueError):
    """Geometric configuration the homology construction cannot handle."""


class PathError(FiniteGapError, ValueError):
    """An integration path is inadmissible (e.g. too close to a branch point)."""


class InvolutionError(FiniteGapError, ValueError):
    """The involution fit is inconsistent with the period data."""


class LocusError(FiniteGapError, ValueError):
    """The Prym-locus equation has no solution modulo the lattice."""


class ThetaDivisorWarning(UserWarning):
    """Evaluation point lies numerically on the theta divisor."""
