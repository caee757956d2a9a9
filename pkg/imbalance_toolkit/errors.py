"""Error types raised across the toolkit.

Three families map onto the CLI exit codes: ConfigError (2), DataError (3) and
TrainingError (4). The class name is the structured error name printed by the CLI.
"""


class ImbalanceToolkitError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 4

    @property
    def name(self) -> str:
        return type(self).__name__


class ConfigError(ImbalanceToolkitError, ValueError):
    exit_code = 2


class DataError(ImbalanceToolkitError, ValueError):
    exit_code = 3


class TrainingError(ImbalanceToolkitError, RuntimeError):
    exit_code = 4


# Configuration
class UnknownMetric(ConfigError):
    pass


class UnknownMethod(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


# Data and argument validation
class EmptyDataset(DataError):
    pass


class InvalidDataset(DataError):
    pass


class InvalidWeights(DataError):
    pass


class InvalidFraction(DataError):
    pass


class InsufficientClassSamples(DataError):
    pass


class TargetExceedsAvailable(DataError):
    pass


class TargetBelowAvailable(DataError):
    pass


class UnknownClass(DataError):
    pass


class ConflictingTargets(DataError):
    pass


class InvalidTargets(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DegenerateWeights(DataError):
    pass


class LengthMismatch(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class AbsentTrueClass(DataError):
    pass


class InvalidCostMatrix(DataError):
    pass


class IncompatibleFeatureWidth(DataError):
    pass


class EmptyInput(DataError):
    pass


class UnknownName(DataError):
    pass


class EmptyData(DataError):
    pass


class ModelFormatError(DataError):
    pass


# Training
class AllRoundsRejected(TrainingError):
    pass


class TooFewMajority(TrainingError):
    pass


class InvalidScheduleOutput(TrainingError):
    pass


def with_context(error: ImbalanceToolkitError, context: str) -> ImbalanceToolkitError:
    """Return a copy of `error` (same type) with `context` prefixed to its message."""
    wrapped = type(error)(f"{context}: {error}")
    wrapped.__cause__ = error
    return wrapped
