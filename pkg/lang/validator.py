# lang/validator.py
from __future__ import annotations

import logging
from typing import Dict, List, Set

from lang import ast_nodes as ast
from lang.diagnostics import Diagnostic, Span
from runtime.builtins import BUILTINS

logger = logging.getLogger(__name__)

# Everything except perform needs the search runtime around it.
_SEARCH_NODES = (
    ast.Branchpoint,
    ast.Choose,
    ast.Protect,
    ast.Searchover,
    ast.RecordScore,
    ast.RecordScoreGroup,
    ast.RecordCosts,
    ast.EarlyStop,
    ast.KillBranch,
    ast.OptionalReturn,
    ast.NoCopyDecl,
    ast.NeedsCopyDecl,
)


def uses_search_primitives(fn: ast.FunctionDef) -> bool:
    return any(isinstance(node, _SEARCH_NODES) for node in fn.walk())


def bound_names(fn: ast.FunctionDef) -> Set[str]:
    names = set(fn.params)
    for node in fn.walk():
        if isinstance(node, ast.Assign) and isinstance(node.target, ast.Name):
            names.add(node.target.id)
        elif isinstance(node, ast.ForIn):
            names.add(node.var)
    return names


class _FunctionChecker:
    def __init__(self, fn: ast.FunctionDef, functions: Dict[str, ast.FunctionDef], out: List[Diagnostic]):
        self.fn = fn
        self.functions = functions
        self.out = out
        self.known = bound_names(fn) | set(functions)
        self.nocopy_seen: Set[str] = set()

    def error(self, message: str, span: Span) -> None:
        self.out.append(Diagnostic("error", message, span))

    def warning(self, message: str, span: Span) -> None:
        self.out.append(Diagnostic("warning", message, span))

    def check(self) -> None:
        seen: Set[str] = set()
        for param in self.fn.params:
            if param in seen:
                self.error(f"duplicate parameter {param} in function {self.fn.name}", self.fn.span)
            seen.add(param)
        self.block(self.fn.body, loop_depth=0)

    def block(self, stmts: ast.Block, loop_depth: int) -> None:
        for stmt in stmts:
            self.stmt(stmt, loop_depth)

    def stmt(self, stmt: ast.Stmt, loop_depth: int) -> None:
        if isinstance(stmt, ast.Break):
            if loop_depth == 0:
                self.error("break outside loop", stmt.span)
        elif isinstance(stmt, ast.Continue):
            if loop_depth == 0:
                self.error("continue outside loop", stmt.span)
        elif isinstance(stmt, ast.If):
            self.expr(stmt.cond)
            self.block(stmt.then, loop_depth)
            if stmt.else_ is not None:
                self.block(stmt.else_, loop_depth)
        elif isinstance(stmt, ast.While):
            self.expr(stmt.cond)
            self.block(stmt.body, loop_depth + 1)
        elif isinstance(stmt, ast.ForIn):
            self.expr(stmt.iterable)
            self.block(stmt.body, loop_depth + 1)
        elif isinstance(stmt, ast.Assign):
            if isinstance(stmt.target, ast.Index):
                self.expr(stmt.target)
            self.expr(stmt.value)
        elif isinstance(stmt, ast.NoCopyDecl):
            self.nocopy_seen.add(stmt.name)
            self.name_ref(stmt.name, stmt.span)
        elif isinstance(stmt, ast.NeedsCopyDecl):
            self.name_ref(stmt.name, stmt.span)
            if stmt.name not in self.nocopy_seen:
                self.warning(f"needscopy {stmt.name} has no effect: it was never declared nocopy", stmt.span)
        elif isinstance(stmt, ast.RecordScoreGroup):
            self.group_evaluator(stmt.evaluator, stmt.span)
            self.expr(stmt.target)
            self.expr(stmt.label)
        else:
            for child in stmt.children():
                if isinstance(child, ast.Expr):
                    self.expr(child)

    def expr(self, expr: ast.Expr) -> None:
        for node in expr.walk():
            if isinstance(node, ast.Name):
                self.name_ref(node.id, node.span)
            elif isinstance(node, ast.Searchover):
                self.searchover(node)
            elif isinstance(node, ast.Call):
                self.plain_call(node)

    def name_ref(self, name: str, span: Span) -> None:
        if name not in self.known:
            self.error(f"unknown name {name}", span)

    def arity(self, target: ast.FunctionDef, given: int, span: Span) -> None:
        if len(target.params) != given:
            self.error(f"function {target.name} expects {len(target.params)} arguments, got {given}", span)

    def searchover(self, node: ast.Searchover) -> None:
        target = self.functions.get(node.func)
        if target is None:
            self.error(f"unknown function {node.func}", node.span)
            return
        self.arity(target, len(node.args), node.span)

    def plain_call(self, node: ast.Call) -> None:
        target = self.functions.get(node.func)
        if target is None:
            if node.func not in BUILTINS:
                self.error(f"unknown function {node.func}", node.span)
            return
        self.arity(target, len(node.args), node.span)
        if uses_search_primitives(target):
            self.error(f"function {node.func} uses search primitives; call it with searchover", node.span)

    def group_evaluator(self, name: str, span: Span) -> None:
        target = self.functions.get(name)
        if target is None:
            self.error(f"unknown function {name}", span)
            return
        if len(target.params) != 1:
            self.error(f"group evaluator {name} must take exactly one argument", span)
        if uses_search_primitives(target):
            self.error(f"function {name} uses search primitives; call it with searchover", span)


def validate(program: ast.SourceProgram) -> List[Diagnostic]:
    """Check structural rules; returns diagnostics, never raises."""
    diagnostics: List[Diagnostic] = []
    functions: Dict[str, ast.FunctionDef] = {}
    for fn in program.function_defs:
        if fn.name in functions:
            diagnostics.append(Diagnostic("error", f"duplicate function {fn.name}", fn.span))
            continue
        if fn.name in BUILTINS:
            diagnostics.append(Diagnostic("error", f"function {fn.name} shadows a builtin", fn.span))
        functions[fn.name] = fn

    for fn in program.function_defs:
        _FunctionChecker(fn, functions, diagnostics).check()

    errors = sum(1 for d in diagnostics if d.is_error)
    if errors:
        logger.debug(f"❌ {program.path}: {errors} validation errors")
    return diagnostics
