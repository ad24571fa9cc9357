"""Exception types shared across the package."""


class VitalseqError(Exception):
    """Base class for all package-specific errors."""


class AutodiffError(VitalseqError):
    """Misuse of the differentiation machinery (non-scalar backward, reuse, ...)."""


class ShapeError(VitalseqError):
    """Operand shapes are invalid for an operation; message names the op."""


class NonFiniteError(VitalseqError):
    """An operation received or would produce NaN/Inf values."""


class DataError(VitalseqError):
    """Invalid clinical data input (bad timestamp, unknown variable, ...)."""


class ConfigError(VitalseqError):
    """Invalid or inconsistent run configuration."""


class MetricsError(VitalseqError):
    """Metrics cannot be computed from the given inputs."""


class CheckpointError(VitalseqError):
    """Checkpoint file is unreadable or does not match the expected config."""
