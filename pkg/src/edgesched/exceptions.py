# ABOUTME: Custom exception hierarchy for edgesched
# ABOUTME: Each error carries the CLI exit code it maps to


class EdgeSchedError(Exception):
    """Base exception for all edgesched errors."""

    exit_code = 1


class InvalidArgumentError(EdgeSchedError):
    """Invalid input provided to a model, solver, or scheduler operation."""

    exit_code = 2


class ShapeError(InvalidArgumentError):
    """Tensor shape does not match what a layer or network expects."""


class InfeasibleError(EdgeSchedError):
    """Offload decision cannot satisfy the MEC frequency budget even at minimum allocation."""

    exit_code = 2


class ProblemTooLargeError(InvalidArgumentError):
    """Instance too large for exhaustive enumeration."""


class NotFittedError(EdgeSchedError):
    """Normalizer used before it was fitted."""

    exit_code = 2


class ConfigError(EdgeSchedError):
    """Run configuration is malformed or inconsistent."""

    exit_code = 2


class DatasetError(EdgeSchedError):
    """Dataset or manifest could not be read or written."""

    exit_code = 3


class CheckpointError(EdgeSchedError):
    """Checkpoint missing, unreadable, or inconsistent with the requested network."""

    exit_code = 3


class MissingCheckpointError(CheckpointError):
    """A learned method was requested without its checkpoint."""

    exit_code = 2


class DivergenceError(EdgeSchedError):
    """Training produced a non-finite loss."""

    exit_code = 4


class BatchItemError(EdgeSchedError):
    """A single instance in a batch failed; wraps the original error."""

    def __init__(self, index: int, error: Exception) -> None:
        super().__init__(f"instance {index}: {type(error).__name__}: {error}")
        self.index = index
        self.error = error
        self.exit_code = getattr(error, "exit_code", 1)
