from dataclasses import dataclass

from .errors import ServiceConfigError

MODES = ("lexicon", "learned")


@dataclass(frozen=True)
class ServiceConfig:
    """How to run the service: which classifier, where its data lives.

    Lexicon mode falls back to the built-in default lexicon when no path is
    given; learned mode always needs a fitted model artifact.
    """

    mode: str = "lexicon"
    lexicon_path: str | None = None
    model_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ServiceConfigError(
                f"unknown mode {self.mode!r} (expected one of {MODES})"
            )
        if self.mode == "learned" and not self.model_path:
            raise ServiceConfigError("learned mode requires model_path")
        if not 0 <= self.port <= 65535:
            raise ServiceConfigError(f"port {self.port} out of range")
