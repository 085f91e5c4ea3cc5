"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``ConfigurationError`` (bad input, exit 1) and ``NumericalError`` (the data
were valid but the estimator could not be evaluated, exit 2).
"""

from __future__ import annotations


class FrechetVCMError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FrechetVCMError, ValueError):
    """Invalid arguments, flags or configuration values."""


class InvalidBandwidthError(ConfigurationError):
    pass


class InvalidWeightsError(ConfigurationError):
    pass


class GridMismatchError(ConfigurationError):
    pass


class DimensionError(ConfigurationError):
    pass


class InvalidMatrixError(ConfigurationError):
    pass


class UnsupportedModifierError(ConfigurationError):
    """The method cannot use a non-Euclidean effect modifier."""


class ValidationError(ConfigurationError):
    """A data record violates an invariant (monotone quantiles, PSD, ...)."""


class ParseError(ConfigurationError):
    pass


class UnsupportedVersionError(ConfigurationError):
    pass


class NumericalError(FrechetVCMError, ArithmeticError):
    """Base for failures of the estimator on otherwise valid data.

    ``index`` optionally records the offending query or test row.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.message = message
        self.index = index

    def __str__(self):
        if self.index is None:
            return self.message
        return f"{self.message} (query {self.index})"


class DegenerateNeighborhoodError(NumericalError):
    """All kernel weights vanished, or the local design is collinear."""


class SingularDesignError(NumericalError):
    pass


class NoFeasibleBandwidthError(NumericalError):
    pass
