"""Exception types shared across the package."""


class SuperGazeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SuperGazeError, ValueError):
    """Invalid configuration, shapes or sizes."""


class PreprocessingError(SuperGazeError, RuntimeError):
    """A per-frame preprocessing step failed."""

    def __init__(self, frame_id, cause):
        self.frame_id = frame_id
        self.cause = cause
        super().__init__(f"preprocessing failed for frame {frame_id!r}: {cause}")


class LoadError(SuperGazeError, OSError):
    """Dataset or annotation file could not be read."""

    def __init__(self, message, records=()):
        self.records = list(records)
        if self.records:
            shown = ", ".join(str(r) for r in self.records[:10])
            more = "" if len(self.records) <= 10 else f" (+{len(self.records) - 10} more)"
            message = f"{message}; offending records: {shown}{more}"
        super().__init__(message)


class TrainingDivergedError(SuperGazeError, RuntimeError):
    """Loss became non-finite during optimization."""


class DomainError(SuperGazeError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. zero-norm vector)."""
