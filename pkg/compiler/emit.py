# compiler/emit.py
"""Stable text listings for `pan compile --emit ...`."""
from __future__ import annotations

from typing import List

from lang import ast_nodes as ast
from lang.printer import format_expr, format_literal, format_program, format_stmt

from compiler.cps import (
    CompiledSearchSpace,
    CondJump,
    Exit,
    FinishExit,
    ForBreak,
    ForEnter,
    ForStep,
    Invoke,
    Jump,
    ReturnExit,
    Yield,
)

EMIT_MODES = ("ast", "normalized", "cps")


def _value_suffix(value) -> str:
    return "" if value is None else f" {format_expr(value)}"


def format_exit(exit: Exit) -> str:
    if isinstance(exit, Jump):
        return f"tail {exit.target}"
    if isinstance(exit, CondJump):
        return f"if {format_expr(exit.cond)} tail {exit.then} else tail {exit.else_}"
    if isinstance(exit, ForEnter):
        return f"for-enter {format_expr(exit.iterable)} tail {exit.header}"
    if isinstance(exit, ForStep):
        return f"for-step {exit.var} tail {exit.body} done tail {exit.done}"
    if isinstance(exit, ForBreak):
        return f"for-break tail {exit.target}"
    if isinstance(exit, Yield):
        params = ", ".join(f"{k}={format_expr(v)}" for k, v in exit.kwargs)
        kind = "choose " if exit.choose else ""
        return f"yield {exit.site} {kind}({params}) -> tmp[{exit.slot}] then {exit.resume}"
    if isinstance(exit, Invoke):
        args = ", ".join(format_expr(a) for a in exit.args)
        return f"invoke {exit.callee}({args}) -> tmp[{exit.slot}] then {exit.resume}"
    if isinstance(exit, ReturnExit):
        return "return" + _value_suffix(exit.value)
    if isinstance(exit, FinishExit):
        return ("killed" if exit.killed else "finish") + _value_suffix(exit.value)
    raise TypeError(f"unknown exit {exit!r}")


def format_search_space(space: CompiledSearchSpace) -> str:
    lines: List[str] = [f"entry {space.entry} -> {space.entry_label}"]
    for site in space.sites:
        name = "" if site.name is None else f" name={format_literal(site.name)}"
        lines.append(f"site {site.id} {site.kind} in {site.function}{name} at {site.span}")
    for body in space.bodies.values():
        lines.append("")
        lines.append(f"block {body.label}")
        for op in body.ops:
            lines.extend(format_stmt(op, 1))
        lines.append(f"    {format_exit(body.exit)}")
    return "\n".join(lines) + "\n"


def emit(program: ast.SourceProgram, mode: str, space: CompiledSearchSpace = None) -> str:
    if mode == "ast":
        return format_program(program)
    if space is None:
        raise ValueError(f"--emit {mode} needs a compiled search space")
    if mode == "normalized":
        return format_program(space.normalized)
    if mode == "cps":
        return format_search_space(space)
    raise ValueError(f"unknown emit mode {mode}; expected one of {', '.join(EMIT_MODES)}")
