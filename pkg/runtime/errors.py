# runtime/errors.py
from __future__ import annotations

from typing import Any, Optional

from lang.diagnostics import NO_SPAN, PanError, Span


class PanRuntimeError(PanError):
    """A tagged error raised while a PanScript program runs."""

    def __init__(self, tag: str, message: str = "", span: Span = NO_SPAN):
        self.tag = tag
        self.message = message or tag
        self.span = span
        location = f" at {span}" if span != NO_SPAN else ""
        super().__init__(f"{tag}: {self.message}{location}")

    def with_span(self, span: Span) -> "PanRuntimeError":
        if self.span == NO_SPAN and span != NO_SPAN:
            self.span = span
            self.args = (f"{self.tag}: {self.message} at {span}",)
        return self

    def to_json(self) -> dict:
        return {"error": self.tag, "message": self.message}


class FinishedStepping(PanError):
    """A choose site has no more elements to hand out."""


class ProtectTriggered(PanError):
    """Internal signal: a protected expression raised its tag; the segment must be resampled."""

    def __init__(self, key: Any, tag: str, max_retries: Optional[int], cause: PanRuntimeError):
        super().__init__(f"protected {tag} raised: {cause}")
        self.key = key
        self.tag = tag
        self.max_retries = max_retries
        self.cause = cause


class ProtectExhausted(PanError):
    def __init__(self, tag: str, attempts: int, cause: Optional[PanRuntimeError] = None):
        super().__init__(f"protect({tag}) still failing after {attempts} attempts")
        self.tag = tag
        self.attempts = attempts
        self.cause = cause

    def to_json(self) -> dict:
        return {"error": "ProtectExhausted", "message": str(self)}


class CheckpointError(PanError):
    """Misuse of the checkpoint API (stepping a finished state, reading a missing value)."""
