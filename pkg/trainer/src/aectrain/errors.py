"""Exception types for the trainer."""


class TrainerError(Exception):
    """Base class for all trainer errors."""


class DatasetFormatError(TrainerError):
    """Corrupt, truncated or mismatched feature dataset files."""


class ConfigError(TrainerError):
    """Training options outside their valid ranges."""


class TrainingDiverged(TrainerError):
    """Loss became non-finite; carries the diagnostics in its message."""


class ModelImportError(TrainerError):
    """Weight file could not be parsed back into a torch model."""
