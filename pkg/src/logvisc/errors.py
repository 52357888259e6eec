"""Exception types raised by the solver and its helpers."""


class LogViscError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefiniteError(LogViscError, ValueError):
    """A tensor required to be SPD has a non-positive eigenvalue."""


class ConvergenceError(LogViscError, RuntimeError):
    """An iterative kernel failed to reach its tolerance."""


class BlowUpError(LogViscError, FloatingPointError):
    """A field left the range where matrix exponentials are representable."""


class DegenerateSplit(LogViscError, ValueError):
    """The rotation/stretch split of a velocity gradient is not unique."""


class PoissonError(ConvergenceError):
    """A linear solve in the projection step missed its residual target."""


class ConfigError(LogViscError, ValueError):
    """Invalid configuration file; ``lineno`` points to the offending line."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CheckpointError(LogViscError, IOError):
    """A checkpoint is corrupt or belongs to a different configuration."""
