"""Exception hierarchy and CLI exit codes."""

from typing import Optional

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


class RecoveryError(Exception):
    """Base class for every error raised by the package."""

    exit_code = EXIT_RUNTIME


class ValidationError(RecoveryError):
    """Bad input data or configuration."""

    exit_code = EXIT_VALIDATION


class ConfigError(ValidationError):
    """Invalid experiment configuration, anchored to a key and a source line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class DuplicateRating(ValidationError):
    pass


class OutOfScale(ValidationError):
    pass


class InvalidValue(ValidationError):
    pass


class InvalidFraction(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class NotTimeSeries(ValidationError):
    pass


class NotUniformGrid(ValidationError):
    pass


class DegenerateScale(ValidationError):
    pass


class MissingLabel(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class EmptyTrainingSet(ValidationError):
    pass


class EmptyTestSet(ValidationError):
    pass


class DivergedError(RecoveryError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration} (loss={loss})")


class ExperimentError(RecoveryError):
    """A failure inside the cross-validation sweep, with its grid coordinates."""
