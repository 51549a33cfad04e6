# lang/tokens.py
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, List

from lang.diagnostics import LexError, Span

KEYWORDS = frozenset(
    "fn if else while for in break continue return nocopy needscopy true false null".split()
)

PRIMITIVES = frozenset(
    [
        "branchpoint",
        "choose",
        "record_score",
        "record_costs",
        "early_stop",
        "kill_branch",
        "optional_return",
        "protect",
        "searchover",
        "perform",
    ]
)


class TokenKind(str, Enum):
    NAME = "Name"
    INT = "Int"
    FLOAT = "Float"
    STRING = "Str"
    KEYWORD = "Keyword"
    PRIM = "Prim"
    LPAREN = "LParen"
    RPAREN = "RParen"
    LBRACE = "LBrace"
    RBRACE = "RBrace"
    LBRACKET = "LBracket"
    RBRACKET = "RBracket"
    COMMA = "Comma"
    COLON = "Colon"
    SEMI = "Semi"
    EQ = "Eq"
    EQEQ = "EqEq"
    NE = "Ne"
    LT = "Lt"
    LE = "Le"
    GT = "Gt"
    GE = "Ge"
    PLUS = "Plus"
    MINUS = "Minus"
    STAR = "Star"
    SLASH = "Slash"
    PERCENT = "Percent"
    AND = "And"
    OR = "Or"
    NOT = "Not"
    EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: Span
    value: Any = None

    def __repr__(self) -> str:
        if self.kind in (TokenKind.NAME, TokenKind.PRIM, TokenKind.KEYWORD):
            return f"{self.kind.value}({self.text})"
        if self.kind in (TokenKind.INT, TokenKind.FLOAT):
            return f"{self.kind.value}({self.value})"
        if self.kind == TokenKind.STRING:
            return f'{self.kind.value}("{self.value}")'
        return self.kind.value


# longest match first
_OPERATORS = [
    ("==", TokenKind.EQEQ),
    ("!=", TokenKind.NE),
    ("<=", TokenKind.LE),
    (">=", TokenKind.GE),
    ("&&", TokenKind.AND),
    ("||", TokenKind.OR),
    ("(", TokenKind.LPAREN),
    (")", TokenKind.RPAREN),
    ("{", TokenKind.LBRACE),
    ("}", TokenKind.RBRACE),
    ("[", TokenKind.LBRACKET),
    ("]", TokenKind.RBRACKET),
    (",", TokenKind.COMMA),
    (":", TokenKind.COLON),
    (";", TokenKind.SEMI),
    ("=", TokenKind.EQ),
    ("<", TokenKind.LT),
    (">", TokenKind.GT),
    ("+", TokenKind.PLUS),
    ("-", TokenKind.MINUS),
    ("*", TokenKind.STAR),
    ("/", TokenKind.SLASH),
    ("%", TokenKind.PERCENT),
    ("!", TokenKind.NOT),
]


def _is_digit(c: str) -> bool:
    return c != "" and c in "0123456789"


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "0": "\0"}

# integer literals are unsigned here; unary minus is applied later
INT_LITERAL_MAX = 2 ** 63 - 1


class Scanner:
    """Turns PanScript source text into a flat token list."""

    def __init__(self, source: str):
        self._src = source
        self._pos = 0
        self._line = 1
        self._col = 1

    def scan(self) -> List[Token]:
        tokens: List[Token] = []
        while True:
            self._skip_trivia()
            if self._pos >= len(self._src):
                tokens.append(Token(TokenKind.EOF, "", self._span_from(self._pos, self._line, self._col)))
                return tokens
            tokens.append(self._next_token())

    # Helpers

    def _peek(self, offset: int = 0) -> str:
        index = self._pos + offset
        return self._src[index] if index < len(self._src) else ""

    def _advance(self, count: int = 1) -> None:
        for _ in range(count):
            if self._src[self._pos] == "\n":
                self._line += 1
                self._col = 1
            else:
                self._col += 1
            self._pos += 1

    def _span_from(self, start: int, line: int, col: int) -> Span:
        return Span(start, self._pos, line, col)

    def _skip_trivia(self) -> None:
        while self._pos < len(self._src):
            c = self._peek()
            if c in " \t\r\n\ufeff":
                self._advance()
            elif c == "#":
                while self._pos < len(self._src) and self._peek() != "\n":
                    self._advance()
            else:
                return

    def _next_token(self) -> Token:
        start, line, col = self._pos, self._line, self._col
        c = self._peek()

        if c.isalpha() or c == "_":
            while self._peek().isalnum() or self._peek() == "_":
                self._advance()
            text = self._src[start:self._pos]
            span = self._span_from(start, line, col)
            if text in KEYWORDS:
                return Token(TokenKind.KEYWORD, text, span)
            if text in PRIMITIVES:
                return Token(TokenKind.PRIM, text, span)
            return Token(TokenKind.NAME, text, span)

        if _is_digit(c):
            return self._number(start, line, col)

        if c == '"':
            return self._string(start, line, col)

        for text, kind in _OPERATORS:
            if self._src.startswith(text, self._pos):
                self._advance(len(text))
                return Token(kind, text, self._span_from(start, line, col))

        raise LexError(f"unrecognized character {c!r}", Span(start, start + 1, line, col))

    def _number(self, start: int, line: int, col: int) -> Token:
        is_float = False
        while _is_digit(self._peek()):
            self._advance()
        if self._peek() == "." and _is_digit(self._peek(1)):
            is_float = True
            self._advance()
            while _is_digit(self._peek()):
                self._advance()
        if self._peek() in ("e", "E") and (
            _is_digit(self._peek(1)) or (self._peek(1) in "+-" and _is_digit(self._peek(2)))
        ):
            is_float = True
            self._advance(2)
            while _is_digit(self._peek()):
                self._advance()
        text = self._src[start:self._pos]
        span = self._span_from(start, line, col)
        if is_float:
            return Token(TokenKind.FLOAT, text, span, float(text))
        value = int(text)
        if value > INT_LITERAL_MAX:
            raise LexError(f"integer literal {text} does not fit in 64 bits", span)
        return Token(TokenKind.INT, text, span, value)

    def _string(self, start: int, line: int, col: int) -> Token:
        self._advance()
        chars: List[str] = []
        while True:
            c = self._peek()
            if c == "" or c == "\n":
                raise LexError("unterminated string", Span(start, self._pos, line, col))
            if c == '"':
                self._advance()
                break
            if c == "\\":
                escape = self._peek(1)
                if escape not in _ESCAPES:
                    raise LexError(
                        f"unknown escape sequence \\{escape}",
                        Span(self._pos, self._pos + 2, self._line, self._col),
                    )
                chars.append(_ESCAPES[escape])
                self._advance(2)
                continue
            chars.append(c)
            self._advance()
        return Token(TokenKind.STRING, self._src[start:self._pos], self._span_from(start, line, col), "".join(chars))


def tokenize(source: str) -> List[Token]:
    """Tokenize PanScript source; the list always ends with an EOF token."""
    return Scanner(source).scan()
