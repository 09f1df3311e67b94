"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array has the wrong rank, channel count, or spatial size."""


class InvalidInputError(ValueError):
    """An argument value is outside its documented domain."""


class ConfigError(ValueError):
    """A configuration object or file violates its invariants."""


class DatasetError(RuntimeError):
    """A dataset directory violates the paired-image layout contract."""


class DecodeError(DatasetError):
    """An image file exists but cannot be decoded."""


class CheckpointError(RuntimeError):
    """A checkpoint is unreadable or incompatible with the requested model."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss."""
