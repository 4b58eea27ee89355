"""Exception hierarchy for rdprofile.

Every error raised on purpose by this package derives from `RdProfileError`.
The two main branches map to distinct command line exit codes.

InputError
    Something is wrong with what the user supplied; files, options, windows
    that are too short and so on.
ComputationError
    The input was acceptable but a numerical procedure could not produce a
    meaningful result.
"""
from __future__ import annotations


class RdProfileError(Exception):
    """Base for all rdprofile errors."""

    exit_code = 1


class InputError(RdProfileError, ValueError):
    """Invalid user supplied input."""

    exit_code = 2


class ComputationError(RdProfileError, ArithmeticError):
    """A computation could not produce a valid result."""

    exit_code = 3


# Input errors.
class UnreadableInputError(InputError):
    """An input file cannot be read."""


class NoNumericColumnError(InputError):
    """An input file contains no parseable numeric value column."""


class NoCompleteWindowsError(InputError):
    """An input stream is too short to form a single window."""


class TimestampOrderError(InputError):
    """Timestamps in an input file go backwards."""


class InvalidWindowError(InputError):
    """Window construction with fewer than 2 or non-finite samples."""


class WindowTooShortError(InputError):
    """A window is too short for the requested analysis."""


class ConfigError(InputError):
    """A configuration file or override is invalid."""


class ScenarioError(InputError):
    """A simulation scenario description is invalid."""


# Computation errors.
class MalformedModelError(ComputationError):
    """A compressed model violates its structural invariants."""


class ZeroRangeDistortionError(ComputationError):
    """Distortion is undefined for an imperfect zero-range reconstruction."""


class EmptyMatrixError(ComputationError):
    """Nothing is left of a feature matrix after filtering."""


class DegenerateDataError(ComputationError):
    """Data has no variance to analyse."""


class SingleClassError(ComputationError):
    """Binary training needs samples of both classes."""


class ClassAbsentError(ComputationError):
    """A requested class has no training samples."""


class TooFewSamplesError(ComputationError):
    """A class has fewer samples than cross-validation folds."""


class MissingCurveError(ComputationError):
    """A rate-distortion curve needed by a strategy is not available."""


class DivergenceError(ComputationError):
    """Training produced a non-finite loss.

    :epoch: The (zero based) epoch at which the loss became non-finite.
    """

    def __init__(self, msg: str, *, epoch: int):
        super().__init__(msg)
        self.epoch = epoch
