"""Exception types shared across the package."""


class GPError(Exception):
    """Base class for all gpinfer errors."""


class InputError(GPError, ValueError):
    """Invalid data passed to an operation (shape mismatch, bad response values)."""


class ConfigurationError(GPError, ValueError):
    """Inconsistent model configuration (wrong parameter count, bad options)."""


class DataError(GPError, ValueError):
    """Malformed external data (CSV cells, missing columns, empty files)."""


class NumericalError(GPError, RuntimeError):
    """Linear-algebra failure that survived the jitter escalation policy.

    `jitter` records the largest diagonal inflation attempted before
    giving up, so callers can report what was tried.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter
