"""Exception hierarchy.

Each family maps onto one CLI exit code (see :mod:`nshops.cli`).
"""


class NSHopsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(NSHopsError):
    """Malformed or inconsistent run configuration."""

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class ModelDomainError(NSHopsError, ValueError):
    """Parameters outside the validity domain of a model or operation."""

    exit_code = 3


class UnsupportedModelError(ModelDomainError):
    """Operation requires a property the bath model does not have (e.g. f_j = g_j)."""


class CapacityError(ModelDomainError):
    """Requested pseudo-Fock space exceeds the configured amplitude cap."""


class InvalidBCFError(ModelDomainError):
    """Discretized correlation matrix is not positive semi-definite."""


class NumericalError(NSHopsError, ArithmeticError):
    """Non-finite values or other integration breakdown."""

    exit_code = 4


class DegenerateTrajectoryError(NumericalError):
    """Vacuum projection of a trajectory vanished; normalized quantities undefined."""


class StatisticalValidationError(NSHopsError):
    """A sampled quantity failed its statistical acceptance check."""

    exit_code = 5
