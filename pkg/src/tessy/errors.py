"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class TessyError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TessyError):
    """Invalid configuration value, profile, or prompt template."""


class StructuralError(TessyError):
    """A span, record, or boundary verdict violates a structural invariant."""


class TransportError(TessyError):
    """Network-level failure that persisted through all retries."""


class EndpointError(TessyError):
    """The endpoint answered with a non-2xx status."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class ProtocolError(TessyError):
    """Response body did not match the wire contract."""


class TrajectoryError(TessyError):
    """A trajectory failed mid-flight; carries the partial state for diagnosis."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class StrategyError(TessyError):
    """Strategy-level failure, e.g. the reject-sampling judge returned no score."""


class AnnotationFormatError(TessyError):
    """Annotator output was not a parsable JSON array of strings."""


class VerbatimViolationError(TessyError):
    """An annotated span string does not occur verbatim after the previous match."""


class PairingError(TessyError):
    """Similarity groups could not be paired by query id."""
