"""Exception hierarchy shared across the package.

Three branches mirror how failures are reported to callers (and, by the
command line tool, as exit codes): configuration problems, input data
problems, and statistics that are undefined for the given inputs.
"""

from __future__ import annotations


class ContreError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ContreError):
    """A request is malformed before any data is touched."""


class DataError(ContreError):
    """Input data is unreadable, malformed, or violates a contract."""


class DegenerateStatistics(ContreError):
    """A statistic is mathematically undefined for the given inputs."""


# --- configuration ---------------------------------------------------------

class UnknownOperator(ConfigError):
    """Operator name not present in the operator table."""


class InvalidMagnitude(ConfigError):
    """Magnitude outside the closed interval [0, 30]."""


class DimensionTooLarge(ConfigError):
    """Requested projection dimension exceeds what the data supports."""


class InsufficientCohort(ConfigError):
    """Too few models to correlate (fewer than three)."""


# --- data ------------------------------------------------------------------

class ParseError(DataError):
    """A serialized record or manifest line could not be parsed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, reason: str, path: str | None = None,
                 line_no: int | None = None):
        self.reason = reason
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:" if line_no is None else f"{path}:{line_no}:"
            where += " "
        super().__init__(f"{where}{reason}")


class DecodeError(DataError):
    """An image file could not be decoded to a supported pixel layout."""


class DimensionMismatch(DataError):
    """A declared dimension disagrees with the payload it describes."""

    def __init__(self, reason: str, path: str | None = None,
                 line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:" if line_no is None else f"{path}:{line_no}:"
            where += " "
        super().__init__(f"{where}{reason}")


class DuplicateRecord(DataError):
    """Two prediction records share (model_id, view, sample_id, view_index)."""


class LengthMismatch(DataError):
    """Paired vectors have different lengths."""


class ShapeMismatch(DataError):
    """An array input has the wrong shape for the operation."""


class NonFiniteInput(DataError):
    """An input contains NaN or infinity where finite values are required."""


class EmptyDataset(DataError):
    """No samples where at least one is required."""


class SingleClass(DataError):
    """Class-separation statistics need at least two distinct classes."""


class EmptyClass(DataError):
    """A class label is declared but has no samples."""


# --- degenerate statistics -------------------------------------------------

class DegenerateVariance(DegenerateStatistics):
    """A rank correlation is undefined because one input has zero variance."""


class ControlDegenerate(DegenerateStatistics):
    """A partial correlation is undefined because the control is perfectly
    rank-correlated with one of the primary vectors."""


class SingularWithin(DegenerateStatistics):
    """The within-class scatter matrix is numerically singular."""
