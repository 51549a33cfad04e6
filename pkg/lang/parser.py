# lang/parser.py
from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from lang import ast_nodes as ast
from lang.diagnostics import ParseError, Span
from lang.tokens import Token, TokenKind, tokenize

logger = logging.getLogger(__name__)

_COMPARISONS = {
    TokenKind.EQEQ: "==",
    TokenKind.NE: "!=",
    TokenKind.LT: "<",
    TokenKind.LE: "<=",
    TokenKind.GT: ">",
    TokenKind.GE: ">=",
}
_ADDITIVE = {TokenKind.PLUS: "+", TokenKind.MINUS: "-"}
_MULTIPLICATIVE = {TokenKind.STAR: "*", TokenKind.SLASH: "/", TokenKind.PERCENT: "%"}

# Primitives that only make sense as a whole statement.
_STATEMENT_PRIMITIVES = frozenset(
    ["record_score", "record_costs", "early_stop", "kill_branch", "optional_return"]
)


def _join(a: Span, b: Span) -> Span:
    return Span(a.start, b.end, a.line, a.column)


class Parser:
    """Recursive-descent parser producing a SourceProgram."""

    def __init__(self, tokens: Sequence[Token], path: str = "<source>", text: str = ""):
        self._tokens = list(tokens)
        self._pos = 0
        self._path = path
        self._text = text
        self._stmt_prims: Dict[str, Callable[[Token], ast.Stmt]] = {
            "record_score": self._record_score,
            "record_costs": self._record_costs,
            "early_stop": self._early_stop,
            "kill_branch": self._kill_branch,
            "optional_return": self._optional_return,
        }

    # ----------------------------
    # Token helpers
    # ----------------------------

    @property
    def _tok(self) -> Token:
        return self._tokens[self._pos]

    def _peek(self, offset: int = 1) -> Token:
        index = min(self._pos + offset, len(self._tokens) - 1)
        return self._tokens[index]

    def _advance(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.kind != TokenKind.EOF:
            self._pos += 1
        return tok

    def _check(self, kind: TokenKind, text: Optional[str] = None) -> bool:
        tok = self._tok
        return tok.kind == kind and (text is None or tok.text == text)

    def _accept(self, kind: TokenKind, text: Optional[str] = None) -> Optional[Token]:
        if self._check(kind, text):
            return self._advance()
        return None

    def _expect(self, kind: TokenKind, text: Optional[str] = None) -> Token:
        if self._check(kind, text):
            return self._advance()
        wanted = text if text is not None else kind.value
        raise self._error(f"expected {wanted}", [wanted])

    def _error(self, message: str, expected: Sequence[str] = ()) -> ParseError:
        tok = self._tok
        found = "end of input" if tok.kind == TokenKind.EOF else repr(tok)
        return ParseError(f"{message}, found {found}", tok.span, expected)

    def _previous_span(self) -> Span:
        return self._tokens[max(self._pos - 1, 0)].span

    # ----------------------------
    # Program structure
    # ----------------------------

    def parse_program(self) -> ast.SourceProgram:
        functions: List[ast.FunctionDef] = []
        while not self._check(TokenKind.EOF):
            functions.append(self._function_def())
        return ast.SourceProgram(tuple(functions), path=self._path, text=self._text)

    def _function_def(self) -> ast.FunctionDef:
        start = self._expect(TokenKind.KEYWORD, "fn")
        name = self._expect(TokenKind.NAME).text
        self._expect(TokenKind.LPAREN)
        params: List[str] = []
        if not self._check(TokenKind.RPAREN):
            params.append(self._expect(TokenKind.NAME).text)
            while self._accept(TokenKind.COMMA):
                params.append(self._expect(TokenKind.NAME).text)
        self._expect(TokenKind.RPAREN)
        body = self._block()
        return ast.FunctionDef(name, tuple(params), body, _join(start.span, self._previous_span()))

    def _block(self) -> ast.Block:
        self._expect(TokenKind.LBRACE)
        stmts: List[ast.Stmt] = []
        while not self._check(TokenKind.RBRACE):
            if self._check(TokenKind.EOF):
                raise self._error("unterminated block", ["}"])
            if self._accept(TokenKind.SEMI):
                continue
            stmts.append(self._statement())
        self._expect(TokenKind.RBRACE)
        return tuple(stmts)

    # ----------------------------
    # Statements
    # ----------------------------

    def _statement(self) -> ast.Stmt:
        tok = self._tok
        if tok.kind == TokenKind.KEYWORD:
            if tok.text == "if":
                return self._if()
            if tok.text == "while":
                self._advance()
                cond = self._expression()
                body = self._block()
                return ast.While(cond, body, _join(tok.span, self._previous_span()))
            if tok.text == "for":
                self._advance()
                var = self._expect(TokenKind.NAME).text
                self._expect(TokenKind.KEYWORD, "in")
                iterable = self._expression()
                body = self._block()
                return ast.ForIn(var, iterable, body, _join(tok.span, self._previous_span()))
            if tok.text == "break":
                self._advance()
                return ast.Break(tok.span)
            if tok.text == "continue":
                self._advance()
                return ast.Continue(tok.span)
            if tok.text == "return":
                self._advance()
                value = None
                if self._starts_expression():
                    value = self._expression()
                return ast.Return(value, _join(tok.span, self._previous_span()))
            if tok.text in ("nocopy", "needscopy"):
                self._advance()
                name = self._expect(TokenKind.NAME).text
                span = _join(tok.span, self._previous_span())
                if tok.text == "nocopy":
                    return ast.NoCopyDecl(name, span)
                return ast.NeedsCopyDecl(name, span)

        if tok.kind == TokenKind.PRIM and tok.text in self._stmt_prims:
            self._advance()
            return self._stmt_prims[tok.text](tok)

        expr = self._expression()
        if self._accept(TokenKind.EQ):
            if not isinstance(expr, (ast.Name, ast.Index)):
                raise ParseError("invalid assignment target", expr.span, ["Name", "Index"])
            value = self._expression()
            return ast.Assign(expr, value, _join(expr.span, value.span))
        return ast.ExprStmt(expr, expr.span)

    def _starts_expression(self) -> bool:
        tok = self._tok
        if tok.kind in (TokenKind.RBRACE, TokenKind.SEMI, TokenKind.EOF):
            return False
        if tok.kind == TokenKind.KEYWORD:
            return tok.text in ("true", "false", "null")
        if tok.kind == TokenKind.PRIM:
            return tok.text not in _STATEMENT_PRIMITIVES
        return True

    def _if(self) -> ast.If:
        start = self._expect(TokenKind.KEYWORD, "if")
        cond = self._expression()
        then = self._block()
        else_: Optional[ast.Block] = None
        if self._accept(TokenKind.KEYWORD, "else"):
            if self._check(TokenKind.KEYWORD, "if"):
                nested = self._if()
                else_ = (nested,)
            else:
                else_ = self._block()
        return ast.If(cond, then, else_, _join(start.span, self._previous_span()))

    def _record_score(self, tok: Token) -> ast.Stmt:
        self._expect(TokenKind.LPAREN)
        if self._check(TokenKind.NAME) and self._peek().kind == TokenKind.COMMA:
            evaluator = self._advance().text
            self._expect(TokenKind.COMMA)
            target = self._expression()
            self._expect(TokenKind.COMMA)
            label_tok = self._expect(TokenKind.NAME)
            if label_tok.text != "label":
                raise ParseError("expected label=", label_tok.span, ["label"])
            self._expect(TokenKind.EQ)
            label = self._expression()
            self._expect(TokenKind.RPAREN)
            return ast.RecordScoreGroup(evaluator, target, label, _join(tok.span, self._previous_span()))
        value = self._expression()
        self._expect(TokenKind.RPAREN)
        return ast.RecordScore(value, _join(tok.span, self._previous_span()))

    def _record_costs(self, tok: Token) -> ast.Stmt:
        self._expect(TokenKind.LPAREN)
        kwargs = self._kwargs_until_rparen()
        self._expect(TokenKind.RPAREN)
        return ast.RecordCosts(kwargs, _join(tok.span, self._previous_span()))

    def _early_stop(self, tok: Token) -> ast.Stmt:
        self._expect(TokenKind.LPAREN)
        self._expect(TokenKind.RPAREN)
        return ast.EarlyStop(_join(tok.span, self._previous_span()))

    def _kill_branch(self, tok: Token) -> ast.Stmt:
        self._expect(TokenKind.LPAREN)
        value = None
        if not self._check(TokenKind.RPAREN):
            value = self._expression()
        self._expect(TokenKind.RPAREN)
        return ast.KillBranch(value, _join(tok.span, self._previous_span()))

    def _optional_return(self, tok: Token) -> ast.Stmt:
        self._expect(TokenKind.LPAREN)
        value = self._expression()
        self._expect(TokenKind.RPAREN)
        return ast.OptionalReturn(value, _join(tok.span, self._previous_span()))

    # ----------------------------
    # Expressions
    # ----------------------------

    def _expression(self) -> ast.Expr:
        return self._or()

    def _or(self) -> ast.Expr:
        left = self._and()
        while self._accept(TokenKind.OR):
            right = self._and()
            left = ast.BinOp("||", left, right, _join(left.span, right.span))
        return left

    def _and(self) -> ast.Expr:
        left = self._comparison()
        while self._accept(TokenKind.AND):
            right = self._comparison()
            left = ast.BinOp("&&", left, right, _join(left.span, right.span))
        return left

    def _binary_level(self, ops: Dict[TokenKind, str], operand: Callable[[], ast.Expr]) -> ast.Expr:
        left = operand()
        while self._tok.kind in ops:
            op = ops[self._advance().kind]
            right = operand()
            left = ast.BinOp(op, left, right, _join(left.span, right.span))
        return left

    def _comparison(self) -> ast.Expr:
        return self._binary_level(_COMPARISONS, self._additive)

    def _additive(self) -> ast.Expr:
        return self._binary_level(_ADDITIVE, self._multiplicative)

    def _multiplicative(self) -> ast.Expr:
        return self._binary_level(_MULTIPLICATIVE, self._unary)

    def _unary(self) -> ast.Expr:
        tok = self._tok
        if tok.kind in (TokenKind.MINUS, TokenKind.NOT):
            self._advance()
            operand = self._unary()
            op = "-" if tok.kind == TokenKind.MINUS else "!"
            return ast.UnaryOp(op, operand, _join(tok.span, operand.span))
        return self._postfix()

    def _postfix(self) -> ast.Expr:
        expr = self._primary()
        while self._accept(TokenKind.LBRACKET):
            index = self._expression()
            self._expect(TokenKind.RBRACKET)
            expr = ast.Index(expr, index, _join(expr.span, self._previous_span()))
        return expr

    def _primary(self) -> ast.Expr:
        tok = self._tok
        if tok.kind in (TokenKind.INT, TokenKind.FLOAT, TokenKind.STRING):
            self._advance()
            return ast.Literal(tok.value, tok.span)
        if tok.kind == TokenKind.KEYWORD and tok.text in ("true", "false", "null"):
            self._advance()
            return ast.Literal({"true": True, "false": False, "null": None}[tok.text], tok.span)
        if tok.kind == TokenKind.NAME:
            self._advance()
            if self._check(TokenKind.LPAREN):
                args = self._call_args()
                return ast.Call(tok.text, args, _join(tok.span, self._previous_span()))
            return ast.Name(tok.text, tok.span)
        if tok.kind == TokenKind.PRIM:
            return self._primitive_expr()
        if self._accept(TokenKind.LPAREN):
            inner = self._expression()
            self._expect(TokenKind.RPAREN)
            return inner
        if self._accept(TokenKind.LBRACKET):
            items: List[ast.Expr] = []
            if not self._check(TokenKind.RBRACKET):
                items.append(self._expression())
                while self._accept(TokenKind.COMMA):
                    if self._check(TokenKind.RBRACKET):
                        break
                    items.append(self._expression())
            self._expect(TokenKind.RBRACKET)
            return ast.ListLit(tuple(items), _join(tok.span, self._previous_span()))
        if self._accept(TokenKind.LBRACE):
            entries: List[Tuple[ast.Expr, ast.Expr]] = []
            while not self._check(TokenKind.RBRACE):
                key = self._expression()
                self._expect(TokenKind.COLON)
                entries.append((key, self._expression()))
                if not self._accept(TokenKind.COMMA):
                    break
            self._expect(TokenKind.RBRACE)
            return ast.MapLit(tuple(entries), _join(tok.span, self._previous_span()))
        raise self._error("expected expression", ["Name", "Int", "Float", "Str", "(", "[", "{"])

    def _call_args(self) -> Tuple[ast.Expr, ...]:
        self._expect(TokenKind.LPAREN)
        args: List[ast.Expr] = []
        if not self._check(TokenKind.RPAREN):
            args.append(self._expression())
            while self._accept(TokenKind.COMMA):
                args.append(self._expression())
        self._expect(TokenKind.RPAREN)
        return tuple(args)

    def _is_kwarg_start(self) -> bool:
        return self._check(TokenKind.NAME) and self._peek().kind == TokenKind.EQ

    def _kwarg(self) -> Tuple[str, ast.Expr]:
        name = self._expect(TokenKind.NAME).text
        self._expect(TokenKind.EQ)
        return name, self._expression()

    def _kwargs_until_rparen(self) -> ast.Kwargs:
        kwargs: List[Tuple[str, ast.Expr]] = []
        if not self._check(TokenKind.RPAREN):
            kwargs.append(self._kwarg())
            while self._accept(TokenKind.COMMA):
                kwargs.append(self._kwarg())
        self._check_duplicate_kwargs(kwargs)
        return tuple(kwargs)

    def _check_duplicate_kwargs(self, kwargs: Sequence[Tuple[str, ast.Expr]]) -> None:
        seen = set()
        for name, value in kwargs:
            if name in seen:
                raise ParseError(f"duplicate keyword argument {name}", value.span)
            seen.add(name)

    def _primitive_expr(self) -> ast.Expr:
        tok = self._advance()
        name = tok.text
        if name in _STATEMENT_PRIMITIVES:
            raise ParseError(f"{name} is a statement and cannot be used as a value", tok.span)
        self._expect(TokenKind.LPAREN)

        if name == "branchpoint":
            kwargs = self._kwargs_until_rparen()
            self._expect(TokenKind.RPAREN)
            return ast.Branchpoint(kwargs, _join(tok.span, self._previous_span()))

        if name == "choose":
            choices = self._expression()
            kwargs: ast.Kwargs = ()
            if self._accept(TokenKind.COMMA):
                kwargs = self._kwargs_until_rparen()
            self._expect(TokenKind.RPAREN)
            return ast.Choose(choices, kwargs, _join(tok.span, self._previous_span()))

        if name == "protect":
            expr = self._expression()
            self._expect(TokenKind.COMMA)
            tag = self._expect(TokenKind.STRING).value
            max_retries = None
            if self._accept(TokenKind.COMMA):
                if self._is_kwarg_start():
                    key, max_retries = self._kwarg()
                    if key != "max_retries":
                        raise ParseError(f"unexpected keyword argument {key}", max_retries.span, ["max_retries"])
                else:
                    max_retries = self._expression()
            self._expect(TokenKind.RPAREN)
            return ast.Protect(expr, tag, max_retries, _join(tok.span, self._previous_span()))

        if name == "searchover":
            callee = self._expect(TokenKind.NAME).text
            args = self._call_args()
            self._expect(TokenKind.RPAREN)
            return ast.Searchover(callee, args, _join(tok.span, self._previous_span()))

        # perform
        op = self._expect(TokenKind.STRING).value
        args: List[ast.Expr] = []
        perform_kwargs: List[Tuple[str, ast.Expr]] = []
        while self._accept(TokenKind.COMMA):
            if self._is_kwarg_start():
                perform_kwargs.append(self._kwarg())
            elif perform_kwargs:
                raise self._error("positional argument after keyword argument")
            else:
                args.append(self._expression())
        self._check_duplicate_kwargs(perform_kwargs)
        self._expect(TokenKind.RPAREN)
        return ast.Perform(op, tuple(args), tuple(perform_kwargs), _join(tok.span, self._previous_span()))


def parse_program(tokens: Sequence[Token], path: str = "<source>", text: str = "") -> ast.SourceProgram:
    parser = Parser(tokens, path, text)
    try:
        return parser.parse_program()
    except RecursionError:
        raise ParseError("expression nested too deeply", parser._tok.span) from None


def parse_source(text: str, path: str = "<source>") -> ast.SourceProgram:
    """Tokenize and parse PanScript text."""
    program = parse_program(tokenize(text), path, text)
    logger.debug(f"🔄 Parsed {path}: {len(program.function_defs)} functions")
    return program
