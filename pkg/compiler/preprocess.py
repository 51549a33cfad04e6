# compiler/preprocess.py
"""Normalization passes run before CPS conversion.

1. append_terminal_callbacks: every body ends in an explicit control marker.
2. desugar_keywords: search keywords become writes to the per-branch info map.
3. anf_lift_primitives: search primitives are hoisted into temp slots.

All three passes are idempotent.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Optional, Tuple

from lang import ast_nodes as ast

logger = logging.getLogger(__name__)


def _ends_in_terminal(stmts: ast.Block) -> bool:
    return bool(stmts) and isinstance(stmts[-1], ast.TERMINALS + (ast.KillBranch,))


def _map_functions(program: ast.SourceProgram, fn_pass) -> ast.SourceProgram:
    return replace(program, function_defs=tuple(fn_pass(fn) for fn in program.function_defs))


# ----------------------------
# 1. Terminal callbacks
# ----------------------------

def _terminate(stmts: ast.Block, marker: ast.Stmt) -> ast.Block:
    converted = _convert_control(stmts)
    if _ends_in_terminal(converted):
        return converted
    return converted + (marker,)


def _convert_control(stmts: ast.Block) -> ast.Block:
    out: List[ast.Stmt] = []
    for stmt in stmts:
        if isinstance(stmt, ast.Break):
            out.append(ast.BreakCallback(stmt.span))
        elif isinstance(stmt, ast.Continue):
            out.append(ast.ContinueCallback(stmt.span))
        elif isinstance(stmt, ast.Return):
            out.append(ast.ReturnCallback(stmt.value, stmt.span))
        elif isinstance(stmt, ast.If):
            join = ast.IfElseCallback(stmt.span)
            then = _terminate(stmt.then, join)
            else_ = _terminate(stmt.else_ or (), join)
            out.append(replace(stmt, then=then, else_=else_))
        elif isinstance(stmt, (ast.While, ast.ForIn)):
            out.append(replace(stmt, body=_terminate(stmt.body, ast.ContinueCallback(stmt.span))))
        else:
            out.append(stmt)
    return tuple(out)


def append_terminal_callbacks(program: ast.SourceProgram, entry: str) -> ast.SourceProgram:
    def fn_pass(fn: ast.FunctionDef) -> ast.FunctionDef:
        marker = ast.FinishCallback(span=fn.span) if fn.name == entry else ast.ReturnCallback(span=fn.span)
        return replace(fn, body=_terminate(fn.body, marker))

    return _map_functions(program, fn_pass)


# ----------------------------
# 2. Keyword desugaring
# ----------------------------

def _desugar_stmt(stmt: ast.Stmt) -> ast.Stmt:
    span = stmt.span
    if isinstance(stmt, ast.EarlyStop):
        return ast.InfoSet("early_stop_search", ast.Literal(True, span), span)
    if isinstance(stmt, ast.KillBranch):
        return ast.FinishCallback(stmt.value, True, span)
    if isinstance(stmt, ast.NoCopyDecl):
        return ast.InfoSet("nocopy_add", ast.Literal(stmt.name, span), span)
    if isinstance(stmt, ast.NeedsCopyDecl):
        return ast.InfoSet("nocopy_remove", ast.Literal(stmt.name, span), span)
    if isinstance(stmt, ast.OptionalReturn):
        return ast.InfoSet("optional_rv", stmt.value, span)
    if isinstance(stmt, ast.RecordCosts):
        entries = tuple((ast.Literal(name, value.span), value) for name, value in stmt.kwargs)
        return ast.InfoSet("costs", ast.MapLit(entries, span), span)
    if isinstance(stmt, ast.RecordScore):
        return ast.InfoSet("score", ast.ScoreDbSubmit(stmt.value, span), span)
    if isinstance(stmt, ast.RecordScoreGroup):
        return ast.InfoSet("score", ast.ScoreDbGroupSubmit(stmt.evaluator, stmt.target, stmt.label, span), span)
    if isinstance(stmt, ast.If):
        return replace(stmt, then=_desugar_block(stmt.then), else_=_desugar_block(stmt.else_ or ()))
    if isinstance(stmt, (ast.While, ast.ForIn)):
        return replace(stmt, body=_desugar_block(stmt.body))
    return stmt


def _desugar_block(stmts: ast.Block) -> ast.Block:
    return tuple(_desugar_stmt(s) for s in stmts)


def desugar_keywords(program: ast.SourceProgram) -> ast.SourceProgram:
    return _map_functions(program, lambda fn: replace(fn, body=_desugar_block(fn.body)))


# ----------------------------
# 3. A-normal-form lifting
# ----------------------------

class _Lifter:
    """Hoists primitives out of one statement, innermost first, left to right."""

    def __init__(self) -> None:
        self.next_slot = 0
        self.lifted: List[ast.Stmt] = []

    def _slot(self) -> int:
        slot = self.next_slot
        self.next_slot += 1
        return slot

    def exprs(self, exprs: Tuple[ast.Expr, ...]) -> Tuple[ast.Expr, ...]:
        return tuple(self.expr(e) for e in exprs)

    def kwargs(self, kwargs: ast.Kwargs) -> ast.Kwargs:
        return tuple((name, self.expr(value)) for name, value in kwargs)

    def optional(self, expr: Optional[ast.Expr]) -> Optional[ast.Expr]:
        return None if expr is None else self.expr(expr)

    def inner(self, expr: ast.Expr) -> ast.Expr:
        """Lift inside `expr` but keep `expr` itself in place."""
        if isinstance(expr, ast.Branchpoint):
            return replace(expr, kwargs=self.kwargs(expr.kwargs))
        if isinstance(expr, ast.Choose):
            return replace(expr, choices=self.expr(expr.choices), kwargs=self.kwargs(expr.kwargs))
        if isinstance(expr, ast.ChooseSite):
            return replace(expr, kwargs=self.kwargs(expr.kwargs))
        if isinstance(expr, ast.Protect):
            return replace(expr, expr=self.expr(expr.expr), max_retries=self.optional(expr.max_retries))
        if isinstance(expr, ast.Searchover):
            return replace(expr, args=self.exprs(expr.args))
        if isinstance(expr, ast.BinOp):
            return replace(expr, left=self.expr(expr.left), right=self.expr(expr.right))
        if isinstance(expr, ast.UnaryOp):
            return replace(expr, operand=self.expr(expr.operand))
        if isinstance(expr, ast.Call):
            return replace(expr, args=self.exprs(expr.args))
        if isinstance(expr, ast.Index):
            return replace(expr, target=self.expr(expr.target), index=self.expr(expr.index))
        if isinstance(expr, ast.ListLit):
            return replace(expr, items=self.exprs(expr.items))
        if isinstance(expr, ast.MapLit):
            return replace(expr, entries=tuple((self.expr(k), self.expr(v)) for k, v in expr.entries))
        if isinstance(expr, ast.Perform):
            return replace(expr, args=self.exprs(expr.args), kwargs=self.kwargs(expr.kwargs))
        if isinstance(expr, ast.ScoreDbSubmit):
            return replace(expr, value=self.expr(expr.value))
        if isinstance(expr, ast.ScoreDbGroupSubmit):
            return replace(expr, target=self.expr(expr.target), label=self.expr(expr.label))
        return expr

    def expr(self, expr: ast.Expr) -> ast.Expr:
        expr = self.inner(expr)
        if not isinstance(expr, ast.LIFTED):
            return expr
        slot = self._slot()
        if isinstance(expr, ast.Choose):
            self.lifted.append(ast.ChooseMaterialize(slot, expr.choices, expr.span))
            expr = ast.ChooseSite(slot, expr.kwargs, expr.span)
        self.lifted.append(ast.TempAssign(slot, expr, expr.span))
        return ast.TempRef(slot, expr.span)


def _lift_block(stmts: ast.Block) -> ast.Block:
    out: List[ast.Stmt] = []
    for stmt in stmts:
        out.extend(_lift_stmt(stmt))
    return tuple(out)


def _lift_stmt(stmt: ast.Stmt) -> List[ast.Stmt]:
    lifter = _Lifter()

    if isinstance(stmt, ast.TempAssign):
        # Already lifted: only its operands may still hold primitives.
        value = lifter.inner(stmt.value)
        return lifter.lifted + [replace(stmt, value=value)]

    if isinstance(stmt, ast.ChooseMaterialize):
        choices = lifter.expr(stmt.choices)
        return lifter.lifted + [replace(stmt, choices=choices)]

    if isinstance(stmt, ast.ExprStmt):
        if isinstance(stmt.expr, ast.LIFTED):
            lifter.expr(stmt.expr)
            return lifter.lifted
        expr = lifter.expr(stmt.expr)
        return lifter.lifted + [replace(stmt, expr=expr)]

    if isinstance(stmt, ast.Assign):
        value = lifter.expr(stmt.value)
        target = lifter.expr(stmt.target)
        return lifter.lifted + [replace(stmt, target=target, value=value)]

    if isinstance(stmt, ast.If):
        cond = lifter.expr(stmt.cond)
        return lifter.lifted + [
            replace(stmt, cond=cond, then=_lift_block(stmt.then), else_=_lift_block(stmt.else_ or ()))
        ]

    if isinstance(stmt, ast.While):
        cond = lifter.expr(stmt.cond)
        body = _lift_block(stmt.body)
        if not lifter.lifted:
            return [replace(stmt, body=body)]
        # Lifted condition: re-evaluate the lifts at the top of every iteration.
        exit_check = ast.If(
            ast.UnaryOp("!", cond, cond.span),
            (ast.BreakCallback(stmt.span),),
            (ast.IfElseCallback(stmt.span),),
            stmt.span,
        )
        return [ast.While(ast.Literal(True, stmt.span), tuple(lifter.lifted) + (exit_check,) + body, stmt.span)]

    if isinstance(stmt, ast.ForIn):
        iterable = lifter.expr(stmt.iterable)
        return lifter.lifted + [replace(stmt, iterable=iterable, body=_lift_block(stmt.body))]

    if isinstance(stmt, ast.InfoSet):
        value = lifter.expr(stmt.value)
        return lifter.lifted + [replace(stmt, value=value)]

    if isinstance(stmt, (ast.FinishCallback, ast.ReturnCallback)):
        value = lifter.optional(stmt.value)
        return lifter.lifted + [replace(stmt, value=value)]

    return [stmt]


def anf_lift_primitives(program: ast.SourceProgram) -> ast.SourceProgram:
    return _map_functions(program, lambda fn: replace(fn, body=_lift_block(fn.body)))


def preprocess(program: ast.SourceProgram, entry: str) -> ast.SourceProgram:
    """Run all normalization passes for the given entry function."""
    normalized = anf_lift_primitives(desugar_keywords(append_terminal_callbacks(program, entry)))
    logger.debug(f"🔄 Normalized {len(normalized.function_defs)} functions for entry '{entry}'")
    return normalized


def count_sites(program: ast.SourceProgram) -> int:
    """Number of branchpoint sites: raw Branchpoint/Choose nodes or their lifted forms."""
    total = 0
    for fn in program.function_defs:
        for node in fn.walk():
            if isinstance(node, (ast.Branchpoint, ast.Choose, ast.ChooseSite)):
                total += 1
    return total
