"""Exception hierarchy for the counterfactual engine.

Every error raised by this package derives from :class:`EngineError`, so
callers can catch one type at an API boundary. Subclasses mark the subsystem
that failed; the CLI maps them onto exit codes.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EngineError):
    """Invalid configuration value (fraction out of range, even k, bad spec string)."""


class IngestError(EngineError):
    """A CSV/schema problem at a specific cell.

    ``row`` is the 0-based data row (header excluded), ``column`` the feature
    name; either may be None when the problem is structural (header mismatch).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        location = ""
        if row is not None or column is not None:
            location = f" (row={row}, column={column})"
        super().__init__(message + location)
        self.row = row
        self.column = column


class StatsError(EngineError):
    """Statistics cannot be fitted (e.g. empty training data)."""


class EncodeError(EngineError):
    """An instance cannot be encoded against fitted statistics."""


class DistanceError(EngineError):
    """Distance arguments disagree with the schema (kind or length mismatch)."""


class TrainError(EngineError):
    """A built-in model cannot be trained on the given data."""


class ModelIOError(EngineError):
    """Transport or protocol failure while scoring through an external model."""


class NoUnlikeNeighborError(EngineError):
    """No training row is predicted as the opposite class (and, where required,
    correctly classified), so no nearest unlike neighbor exists."""


class EvalError(EngineError):
    """Benchmark aggregation received inconsistent or degenerate inputs."""
