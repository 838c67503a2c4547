"""Exception hierarchy shared by all annbench modules."""


class AnnbenchError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(AnnbenchError):
    """Caller violated a precondition (bad argument, wrong metric, ...)."""


class ConfigError(UsageError):
    """Experiment configuration document is malformed.

    Carries the path to the offending node when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class FormatError(AnnbenchError):
    """A container file is missing arrays or otherwise unreadable."""


class ValidationError(AnnbenchError):
    """Stored data fails its integrity checks."""


class ProtocolError(AnnbenchError):
    """The external-adapter wire protocol was violated; session is dead."""
