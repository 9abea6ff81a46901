"""
Exceptions raised by timbre_forge.

Every error the pipeline raises on purpose derives from ``TimbreForgeError`` so
callers (the CLI in particular) can separate expected failures from bugs.
"""


class TimbreForgeError(Exception):
    """Base class for all timbre_forge errors."""


class EmptyAudio(TimbreForgeError):
    """An operation received a clip with no samples."""


class ShortAudio(TimbreForgeError):
    """A clip is shorter than an operation requires."""

    def __init__(self, message: str, required: int | None = None, got: int | None = None):
        super().__init__(message)
        self.required = required
        self.got = got


class InsufficientData(TimbreForgeError):
    """Not enough files, recordings or vectors to proceed."""


class MissingStats(TimbreForgeError):
    """A mel-spectrogram lacks the normalization statistics needed to invert it."""


class ShapeError(TimbreForgeError):
    """Array shapes do not match what an operation expects."""

    def __init__(self, message: str, expected=None, got=None):
        if expected is not None or got is not None:
            message = f"{message} (expected {expected}, got {got})"
        super().__init__(message)
        self.expected = expected
        self.got = got


class SizeError(ShapeError):
    """An input is smaller than a fixed analysis window."""


class PadError(ShapeError):
    """Reflection padding is at least as large as the padded dimension."""


class NanGradient(TimbreForgeError):
    """A parameter gradient contains NaN or infinity."""

    def __init__(self, parameter: str):
        super().__init__(f"Non-finite gradient for parameter '{parameter}'")
        self.parameter = parameter


class UnknownDomain(TimbreForgeError):
    """A domain name is not part of the model or manifest."""

    def __init__(self, domain: str, known=()):
        super().__init__(f"Unknown domain '{domain}'. Known domains: {', '.join(known) or 'none'}")
        self.domain = domain


class ConfigError(TimbreForgeError):
    """Configuration is invalid. ``errors`` maps field names to messages."""

    def __init__(self, message: str, errors: dict[str, str] | None = None):
        self.errors = dict(errors or {})
        if self.errors:
            details = "; ".join(f"{field}: {msg}" for field, msg in sorted(self.errors.items()))
            message = f"{message}: {details}"
        super().__init__(message)


class NonFiniteLoss(TimbreForgeError):
    """A loss term evaluated to NaN or infinity."""

    def __init__(self, term: str, report: dict | None = None):
        super().__init__(f"Loss term '{term}' is not finite")
        self.term = term
        self.report = report or {}


class FormatError(TimbreForgeError):
    """A file does not follow the expected layout."""


class VersionError(FormatError):
    """A file was written with an unsupported format version."""


class ChecksumError(FormatError):
    """A file is truncated or its checksum does not match."""


class NumericalError(TimbreForgeError):
    """A numerical routine produced non-finite output."""


class ZeroEnergyWarning(UserWarning):
    """A clip has zero RMS, so gain-based processing left it untouched."""
