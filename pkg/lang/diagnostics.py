# lang/diagnostics.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Literal


class PanError(Exception):
    """Base class for every error raised by the PanScript toolchain."""


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int = 1
    column: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


NO_SPAN = Span(0, 0, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    message: str
    span: Span

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def render(self, path: str = "<source>") -> str:
        return f"{path}:{self.span}: {self.severity}: {self.message}"


class LexError(PanError):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


class ParseError(PanError):
    def __init__(self, message: str, span: Span, expected: Iterable[str] = ()):
        self.message = message
        self.span = span
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{span}: {message}{detail}")


class ProgramInvalid(PanError):
    """Raised by load helpers when validation produced error diagnostics."""

    def __init__(self, diagnostics: List[Diagnostic], path: str = "<source>"):
        self.diagnostics = diagnostics
        self.path = path
        errors = [d for d in diagnostics if d.is_error]
        super().__init__("; ".join(d.render(path) for d in errors) or "invalid program")
