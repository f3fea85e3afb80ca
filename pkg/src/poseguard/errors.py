"""Exception hierarchy shared across the package."""


class PoseGuardError(Exception):
    """Base class for all errors raised by this package."""


class NormalizationError(PoseGuardError):
    """Skeleton could not be normalized (degenerate bounding box)."""


class InsufficientKeypointsError(PoseGuardError):
    """Too few detected keypoints for the requested operation."""


class LabelingConflictError(PoseGuardError):
    """Interval label rows assign conflicting labels to the same frames."""


class StratificationError(PoseGuardError):
    """A class is missing or a split specification is unusable."""


class PersistenceError(PoseGuardError):
    """Reading or writing an artifact file failed."""


class DataError(PoseGuardError):
    """Input data violates a contract (dimension, finiteness, labels)."""


class TrainingError(PoseGuardError):
    """Classifier training cannot proceed on the given data."""


class CalibrationError(PoseGuardError):
    """Probability calibration missing or impossible."""


class ModelFormatError(PoseGuardError):
    """Model file is malformed or has an unsupported format version."""


class StreamError(PoseGuardError):
    """Frame stream violates ordering or a record is malformed."""


class ConfigError(PoseGuardError):
    """Invalid configuration value or reference."""
