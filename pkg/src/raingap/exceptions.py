"""Errors raised by the raingap package.

Every error carries the CLI exit code it maps to, so the command line only has to
catch :class:`RaingapError`.
"""

from typing import Any, Dict, List, Optional

from .const import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC


class RaingapError(Exception):
    """Base class for all raingap errors."""

    exit_code = EXIT_DATA


class ConfigError(RaingapError):
    """Error to indicate invalid configuration or missing tuned parameters."""

    exit_code = EXIT_CONFIG


class DataError(RaingapError):
    """Error to indicate unusable input data."""

    exit_code = EXIT_DATA


class NumericError(RaingapError):
    """Error to indicate a numerical failure."""

    exit_code = EXIT_NUMERIC


class AlignmentError(DataError):
    """Error to indicate a timestamp off the expected lattice."""

    def __init__(self, stamp: Any, minutes: int = 15) -> None:
        super().__init__(f"timestamp {stamp} is not on the {minutes}-minute lattice")
        self.stamp = stamp


class UnknownSiteError(DataError, LookupError):
    """Error to indicate a site id absent from the catalog or dataset."""


class PoolingError(DataError):
    """Error to indicate a region that cannot be pooled."""


class DomainError(DataError, ValueError):
    """Error to indicate an argument outside its domain."""


class ScalerFitError(DataError):
    """Error to indicate a feature with no present training value."""


class TrainingDataError(DataError):
    """Error to indicate a training set with no usable rows."""


class FoldError(DataError):
    """Error to indicate a fold that cannot be run."""

    def __init__(self, fold: int, message: str) -> None:
        super().__init__(f"fold {fold}: {message}")
        self.fold = fold


class SchemaMismatchError(DataError):
    """Error to indicate rows whose columns do not match a fitted model."""


class ImputerError(DataError):
    """Error to indicate an imputer that cannot be fitted."""


class MetricError(DataError):
    """Error to indicate metric inputs of the wrong shape."""


class ComparisonError(DataError):
    """Error to indicate reports that cannot be compared."""


class WindowError(DataError):
    """Error to indicate an export window selecting no rows."""


class SingularSystemError(NumericError):
    """Error to indicate a singular interpolation system."""


class DegenerateModelError(NumericError):
    """Error to indicate a training set a learner cannot fit."""


class TuningError(NumericError):
    """Error to indicate a grid search where every point failed."""

    def __init__(self, message: str, diagnostics: Optional[List[Dict[str, Any]]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []
