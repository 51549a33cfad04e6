# lang/printer.py
"""Canonical text form for raw and normalized PanScript trees.

Raw programs print back to parseable source (binary operators are fully
parenthesized). Normalized-only nodes print in a readable marker syntax
used by `--emit normalized` and the CPS listing; that form is not meant to
be parsed again.
"""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Type

from lang import ast_nodes as ast

INDENT = "    "

_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r", "\0": "\\0"}


def format_literal(value) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return '"' + "".join(_STRING_ESCAPES.get(c, c) for c in value) + '"'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _kwargs(kwargs: ast.Kwargs) -> List[str]:
    return [f"{name}={format_expr(value)}" for name, value in kwargs]


def _args(args) -> List[str]:
    return [format_expr(a) for a in args]


_EXPR_FORMATTERS: Dict[Type[ast.Expr], Callable[[ast.Expr], str]] = {
    ast.Literal: lambda e: format_literal(e.value),
    ast.Name: lambda e: e.id,
    ast.BinOp: lambda e: f"({format_expr(e.left)} {e.op} {format_expr(e.right)})",
    ast.UnaryOp: lambda e: f"({e.op}{format_expr(e.operand)})",
    ast.Call: lambda e: f"{e.func}({', '.join(_args(e.args))})",
    ast.Index: lambda e: f"{format_expr(e.target)}[{format_expr(e.index)}]",
    ast.ListLit: lambda e: f"[{', '.join(_args(e.items))}]",
    ast.MapLit: lambda e: "{" + ", ".join(f"{format_expr(k)}: {format_expr(v)}" for k, v in e.entries) + "}",
    ast.Branchpoint: lambda e: f"branchpoint({', '.join(_kwargs(e.kwargs))})",
    ast.Choose: lambda e: f"choose({', '.join([format_expr(e.choices)] + _kwargs(e.kwargs))})",
    ast.Protect: lambda e: "protect("
    + ", ".join(
        [format_expr(e.expr), format_literal(e.tag)]
        + ([f"max_retries={format_expr(e.max_retries)}"] if e.max_retries is not None else [])
    )
    + ")",
    ast.Searchover: lambda e: f"searchover({e.func}({', '.join(_args(e.args))}))",
    ast.Perform: lambda e: f"perform({', '.join([format_literal(e.op)] + _args(e.args) + _kwargs(e.kwargs))})",
    ast.TempRef: lambda e: f"tmp[{e.slot}]",
    ast.ChooseSite: lambda e: f"choose_site({', '.join([f'tmp[{e.slot}]'] + _kwargs(e.kwargs))})",
    ast.ScoreDbSubmit: lambda e: f"scoredb_submit({format_expr(e.value)})",
    ast.ScoreDbGroupSubmit: lambda e: f"scoredb_submit_group({e.evaluator}, {format_expr(e.target)}, label={format_expr(e.label)})",
}


def format_expr(expr: ast.Expr) -> str:
    formatter = _EXPR_FORMATTERS.get(type(expr))
    if formatter is None:
        raise TypeError(f"cannot format expression node {type(expr).__name__}")
    return formatter(expr)


def _optional(prefix: str, value: Optional[ast.Expr]) -> str:
    return prefix if value is None else f"{prefix}({format_expr(value)})"


def _simple_stmt(stmt: ast.Stmt) -> Optional[str]:
    if isinstance(stmt, ast.Assign):
        return f"{format_expr(stmt.target)} = {format_expr(stmt.value)}"
    if isinstance(stmt, ast.NoCopyDecl):
        return f"nocopy {stmt.name}"
    if isinstance(stmt, ast.NeedsCopyDecl):
        return f"needscopy {stmt.name}"
    if isinstance(stmt, ast.Break):
        return "break"
    if isinstance(stmt, ast.Continue):
        return "continue"
    if isinstance(stmt, ast.Return):
        return "return" if stmt.value is None else f"return {format_expr(stmt.value)}"
    if isinstance(stmt, ast.ExprStmt):
        return format_expr(stmt.expr)
    if isinstance(stmt, ast.RecordScore):
        return f"record_score({format_expr(stmt.value)})"
    if isinstance(stmt, ast.RecordScoreGroup):
        return f"record_score({stmt.evaluator}, {format_expr(stmt.target)}, label={format_expr(stmt.label)})"
    if isinstance(stmt, ast.RecordCosts):
        return f"record_costs({', '.join(_kwargs(stmt.kwargs))})"
    if isinstance(stmt, ast.EarlyStop):
        return "early_stop()"
    if isinstance(stmt, ast.KillBranch):
        return "kill_branch()" if stmt.value is None else f"kill_branch({format_expr(stmt.value)})"
    if isinstance(stmt, ast.OptionalReturn):
        return f"optional_return({format_expr(stmt.value)})"
    # normalized markers
    if isinstance(stmt, ast.TempAssign):
        return f"tmp[{stmt.slot}] = {format_expr(stmt.value)}"
    if isinstance(stmt, ast.ChooseMaterialize):
        return f"materialize tmp[{stmt.slot}] <- {format_expr(stmt.choices)}"
    if isinstance(stmt, ast.InfoSet):
        return f'info["{stmt.key}"] = {format_expr(stmt.value)}'
    if isinstance(stmt, ast.FinishCallback):
        return _optional("kill_callback" if stmt.killed else "finish_callback", stmt.value)
    if isinstance(stmt, ast.ReturnCallback):
        return _optional("return_callback", stmt.value)
    if isinstance(stmt, ast.BreakCallback):
        return "break_callback"
    if isinstance(stmt, ast.ContinueCallback):
        return "continue_callback"
    if isinstance(stmt, ast.IfElseCallback):
        return "if_else_callback"
    return None


def format_block(stmts: ast.Block, depth: int) -> List[str]:
    lines: List[str] = []
    for stmt in stmts:
        lines.extend(format_stmt(stmt, depth))
    return lines


def format_stmt(stmt: ast.Stmt, depth: int = 0) -> List[str]:
    pad = INDENT * depth
    simple = _simple_stmt(stmt)
    if simple is not None:
        return [pad + simple]
    if isinstance(stmt, ast.If):
        lines = [f"{pad}if {format_expr(stmt.cond)} {{"]
        lines.extend(format_block(stmt.then, depth + 1))
        if stmt.else_ is not None:
            lines.append(f"{pad}}} else {{")
            lines.extend(format_block(stmt.else_, depth + 1))
        lines.append(pad + "}")
        return lines
    if isinstance(stmt, ast.While):
        return [f"{pad}while {format_expr(stmt.cond)} {{", *format_block(stmt.body, depth + 1), pad + "}"]
    if isinstance(stmt, ast.ForIn):
        return [
            f"{pad}for {stmt.var} in {format_expr(stmt.iterable)} {{",
            *format_block(stmt.body, depth + 1),
            pad + "}",
        ]
    raise TypeError(f"cannot format statement node {type(stmt).__name__}")


def format_function(fn: ast.FunctionDef) -> str:
    lines = [f"fn {fn.name}({', '.join(fn.params)}) {{", *format_block(fn.body, 1), "}"]
    return "\n".join(lines)


def format_program(program: ast.SourceProgram) -> str:
    return "\n\n".join(format_function(fn) for fn in program.function_defs) + "\n"
