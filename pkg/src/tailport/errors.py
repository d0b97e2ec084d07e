"""Exception hierarchy shared across the library.

Every error carries a short machine-readable ``category`` used by the
command-line layer to build one-line ``ERROR:<category>:<message>`` output.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "TailportError",
    "DomainError",
    "DimensionError",
    "DataError",
    "InsufficientDataError",
    "SingularMatrixError",
    "DefinitenessError",
    "RangeError",
    "SpectralBoundError",
    "DegenerateConfigurationError",
    "ZeroVarianceError",
    "SolverError",
    "ConfigError",
]


class TailportError(Exception):
    """Base class for all library errors."""

    category = "error"


class DomainError(TailportError, ValueError):
    """A parameter lies outside its legal range (e.g. tau not in (0,1))."""

    category = "domain"


class DimensionError(TailportError, ValueError):
    """Array shapes are inconsistent or an index is out of range."""

    category = "dimension"


class DataError(TailportError, ValueError):
    """Input data is malformed: NaN/inf entries, bad timestamps, duplicates."""

    category = "data"


class InsufficientDataError(TailportError, ValueError):
    """Too few observations for the requested fit."""

    category = "insufficient-data"


class SingularMatrixError(TailportError):
    """A design or covariance matrix is singular or rank deficient."""

    category = "singular"


class DefinitenessError(TailportError):
    """A matrix required to be positive definite is not.

    Carries the offending smallest eigenvalue and its eigenvector so callers
    can report which direction of the asset space collapses.
    """

    category = "definiteness"

    def __init__(self, message: str, lambda_min: float, eigenvector: np.ndarray):
        super().__init__(message)
        self.lambda_min = float(lambda_min)
        self.eigenvector = np.asarray(eigenvector, dtype=float)


class RangeError(TailportError):
    """A forecast left its admissible range in strict mode."""

    category = "range"


class SpectralBoundError(TailportError):
    """Eigenvalues of the transformed adjacency leave the open unit interval,
    so the geometric-series expansion of the precision matrix is invalid."""

    category = "spectral-bound"


class DegenerateConfigurationError(TailportError):
    """A denominator that the formulas divide by is exactly zero."""

    category = "degenerate"


class ZeroVarianceError(TailportError):
    """A return series has zero variance, leaving its Sharpe ratio undefined."""

    category = "zero-variance"


class SolverError(TailportError):
    """An iterative or LP solver failed to reach its optimality certificate."""

    category = "solver"


class ConfigError(TailportError):
    """A configuration file could not be parsed."""

    category = "config"
