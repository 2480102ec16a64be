"""Exception types shared across the package.

The CLI maps each family to an exit code, so library code should raise the
most specific one that applies.
"""


class ColearnError(Exception):
    """Base class for all package errors."""


class InputError(ColearnError, ValueError):
    """Malformed, inconsistent or missing input data."""


class NumericalError(ColearnError, ArithmeticError):
    """An estimator or metric cannot be evaluated on the given data."""


class RankDeficientError(NumericalError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; dependent columns: "
                         + ", ".join(self.columns))


class SeparationError(NumericalError):
    """Probit coefficients diverge (perfect or quasi-perfect separation)."""
