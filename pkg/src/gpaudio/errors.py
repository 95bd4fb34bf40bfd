"""Exception hierarchy.

Every error raised by this package derives from :class:`GPAudioError` so
callers (CLI, service) can map failures to stable exit codes / HTTP statuses.
"""

from __future__ import annotations


class GPAudioError(Exception):
    """Base class for all gpaudio errors."""


class ParameterError(GPAudioError, ValueError):
    """A hyperparameter or input value violates its domain."""


class SelectorError(GPAudioError, ValueError):
    """A hyperparameter selector does not resolve to a scalar parameter."""


class ConfigError(GPAudioError, ValueError):
    """A configuration document is malformed or inconsistent."""


class AudioFormatError(GPAudioError, ValueError):
    """An audio file cannot be decoded.

    Carries ``offset`` (byte offset of the offending structure) when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SampleRateError(AudioFormatError):
    """The sample rate is not one the pipeline supports."""


class EmptyWindowError(GPAudioError, ValueError):
    """No sample falls inside the change-window at the required weight."""


class AlignmentError(GPAudioError, ValueError):
    """Held-out truth does not align with the gap sample times."""


class NumericalError(GPAudioError, ArithmeticError):
    """Matrix factorization failed even after jitter escalation.

    ``attempted_jitter`` records the largest diagonal stabilizer tried.
    """

    def __init__(self, message: str, attempted_jitter: float | None = None):
        if attempted_jitter is not None:
            message = f"{message} (jitter escalated up to {attempted_jitter:g})"
        super().__init__(message)
        self.attempted_jitter = attempted_jitter
