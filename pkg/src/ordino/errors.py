"""Exception types raised across the package."""

from __future__ import annotations

import numpy as np


class OrdinoError(Exception):
    """Base class for all package errors."""


class DimensionError(OrdinoError, ValueError):
    """Raised when a vector or matrix has an unsupported shape (e.g. K < 3)."""


class NumericError(OrdinoError, ValueError):
    """Raised on non-finite input."""


class PreconditionError(OrdinoError, ValueError):
    """Raised when an input violates an operation's precondition."""


class ParameterError(OrdinoError, ValueError):
    """Raised for out-of-range hyperparameters."""


class ConfigurationError(OrdinoError, ValueError):
    """Raised for inconsistent run configuration (empty splits, unpaired reports, ...)."""


class ConvergenceError(OrdinoError, RuntimeError):
    """Raised when an iterative solver hits its iteration cap.

    Attributes:
        best: the last iterate reached by the solver
        residual: displacement between the last two iterates
    """

    def __init__(self, message: str, best: np.ndarray, residual: float):
        super().__init__(message)
        self.best = best
        self.residual = residual
