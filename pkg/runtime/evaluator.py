# runtime/evaluator.py
"""Statement and expression evaluation for the straight-line parts of a program.

The trampoline hands every plain operation of a continuation body to
`Interpreter.exec_op`; plain calls `f(x)` and group evaluators run the
function's source body directly through `call_function`.
"""
from __future__ import annotations

import logging
from typing import Any, Callable, Dict, List, Optional

from lang import ast_nodes as ast
from runtime.builtins import BUILTINS
from runtime.errors import PanRuntimeError, ProtectTriggered
from runtime.frame import Frame, IterCursor
from runtime.scoredb import ScoreHandle
from runtime.session import Info, SessionState
from runtime.values import (
    FnRef,
    apply_binop,
    apply_unop,
    check_int,
    clone_value,
    index_get,
    index_set,
    is_number,
    materialize_iterable,
    truthy,
    type_name,
)

logger = logging.getLogger(__name__)

# Temp-slot key under which a lifted choose keeps its materialized choices.
def choices_slot(slot: int) -> tuple:
    return ("choices", slot)


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class _ReturnSignal(Exception):
    def __init__(self, value: Any):
        super().__init__()
        self.value = value


_TEMP_OPS = (ast.TempAssign, ast.ChooseMaterialize)


class Interpreter:
    def __init__(self, program: ast.SourceProgram, session: SessionState):
        self.program = program
        self.session = session
        self.functions: Dict[str, ast.FunctionDef] = {fn.name: fn for fn in program.function_defs}
        self._expr_dispatch: Dict[type, Callable[[Any, Frame, Optional[Info]], Any]] = {
            ast.Literal: self._literal,
            ast.Name: self._name,
            ast.BinOp: self._binop,
            ast.UnaryOp: self._unop,
            ast.Call: self._call,
            ast.Index: self._index,
            ast.ListLit: self._list,
            ast.MapLit: self._map,
            ast.Perform: self._perform,
            ast.Protect: self._protect,
            ast.TempRef: self._temp_ref,
            ast.ScoreDbSubmit: self._score_submit,
            ast.ScoreDbGroupSubmit: self._score_group_submit,
        }
        self._stmt_dispatch: Dict[type, Callable[[Any, Frame, Optional[Info]], None]] = {
            ast.Assign: self._assign,
            ast.ExprStmt: self._expr_stmt,
            ast.If: self._if,
            ast.While: self._while,
            ast.ForIn: self._for,
            ast.Break: self._break,
            ast.BreakCallback: self._break,
            ast.Continue: self._continue,
            ast.ContinueCallback: self._continue,
            ast.IfElseCallback: self._noop,
            ast.Return: self._return,
            ast.TempAssign: self._temp_assign,
            ast.ChooseMaterialize: self._choose_materialize,
            ast.InfoSet: self._info_set,
        }

    # ----------------------------
    # Entry points
    # ----------------------------

    def eval_expr(self, expr: ast.Expr, frame: Frame, info: Optional[Info] = None) -> Any:
        handler = self._expr_dispatch.get(type(expr))
        if handler is None:
            raise PanRuntimeError("TypeError", f"{type(expr).__name__} cannot be evaluated here", expr.span)
        return handler(expr, frame, info)

    def exec_stmt(self, stmt: ast.Stmt, frame: Frame, info: Optional[Info] = None) -> None:
        handler = self._stmt_dispatch.get(type(stmt))
        if handler is None:
            raise PanRuntimeError("TypeError", f"{type(stmt).__name__} cannot be executed here", stmt.span)
        try:
            handler(stmt, frame, info)
        except PanRuntimeError as e:
            raise e.with_span(stmt.span)

    def exec_op(self, stmt: ast.Stmt, frame: Frame, info: Info) -> None:
        """Run one plain operation of a continuation body; temps die with their statement."""
        self.exec_stmt(stmt, frame, info)
        if not isinstance(stmt, _TEMP_OPS):
            frame.tmp_vars.clear()

    def call_function(self, name: str, args: List[Any]) -> Any:
        fn = self.functions.get(name)
        if fn is None:
            raise PanRuntimeError("NameError", f"function {name} is not defined")
        if len(args) != len(fn.params):
            raise PanRuntimeError("TypeError", f"function {name} expects {len(fn.params)} arguments, got {len(args)}")
        frame = Frame(name, dict(zip(fn.params, args)))
        try:
            self.exec_block(fn.body, frame, None)
        except _ReturnSignal as signal:
            return signal.value
        except RecursionError:
            raise PanRuntimeError("RecursionError", f"maximum call depth exceeded in {name}", fn.span)
        return None

    def exec_block(self, stmts: ast.Block, frame: Frame, info: Optional[Info]) -> None:
        for stmt in stmts:
            self.exec_stmt(stmt, frame, info)
            if not isinstance(stmt, _TEMP_OPS):
                frame.tmp_vars.clear()

    # ----------------------------
    # Expressions
    # ----------------------------

    def _literal(self, expr: ast.Literal, frame: Frame, info: Optional[Info]) -> Any:
        return expr.value

    def _name(self, expr: ast.Name, frame: Frame, info: Optional[Info]) -> Any:
        try:
            return frame.lookup(expr.id)
        except PanRuntimeError:
            if expr.id in self.functions:
                return FnRef(expr.id)
            raise

    def _binop(self, expr: ast.BinOp, frame: Frame, info: Optional[Info]) -> Any:
        left = self.eval_expr(expr.left, frame, info)
        if expr.op == "&&":
            return truthy(left) and truthy(self.eval_expr(expr.right, frame, info))
        if expr.op == "||":
            return truthy(left) or truthy(self.eval_expr(expr.right, frame, info))
        return apply_binop(expr.op, left, self.eval_expr(expr.right, frame, info))

    def _unop(self, expr: ast.UnaryOp, frame: Frame, info: Optional[Info]) -> Any:
        return apply_unop(expr.op, self.eval_expr(expr.operand, frame, info))

    def _call(self, expr: ast.Call, frame: Frame, info: Optional[Info]) -> Any:
        args = [self.eval_expr(a, frame, info) for a in expr.args]
        if expr.func in self.functions:
            return self.call_function(expr.func, args)
        builtin = BUILTINS.get(expr.func)
        if builtin is not None:
            return builtin(args)
        raise PanRuntimeError("NameError", f"function {expr.func} is not defined", expr.span)

    def _index(self, expr: ast.Index, frame: Frame, info: Optional[Info]) -> Any:
        return index_get(self.eval_expr(expr.target, frame, info), self.eval_expr(expr.index, frame, info))

    def _list(self, expr: ast.ListLit, frame: Frame, info: Optional[Info]) -> Any:
        return [self.eval_expr(item, frame, info) for item in expr.items]

    def _map(self, expr: ast.MapLit, frame: Frame, info: Optional[Info]) -> Any:
        out: Dict[str, Any] = {}
        for key_expr, value_expr in expr.entries:
            key = self.eval_expr(key_expr, frame, info)
            if not isinstance(key, str):
                raise PanRuntimeError("TypeError", f"map key must be str, not {type_name(key)}", key_expr.span)
            out[key] = self.eval_expr(value_expr, frame, info)
        return out

    def _perform(self, expr: ast.Perform, frame: Frame, info: Optional[Info]) -> Any:
        args = [self.eval_expr(a, frame, info) for a in expr.args]
        kwargs = {name: self.eval_expr(v, frame, info) for name, v in expr.kwargs}
        return self.session.provider.perform(expr.op, args, kwargs, expr.span.start)

    def _protect(self, expr: ast.Protect, frame: Frame, info: Optional[Info]) -> Any:
        max_retries = None
        if expr.max_retries is not None:
            max_retries = self.eval_expr(expr.max_retries, frame, info)
            if not isinstance(max_retries, int) or isinstance(max_retries, bool) or max_retries < 0:
                raise PanRuntimeError("TypeError", f"max_retries must be a non-negative int, got {max_retries!r}")
        try:
            return self.eval_expr(expr.expr, frame, info)
        except PanRuntimeError as e:
            if e.tag != expr.tag:
                raise
            key = (expr.span.start, expr.span.end, frame.function)
            raise ProtectTriggered(key, expr.tag, max_retries, e)

    def _temp_ref(self, expr: ast.TempRef, frame: Frame, info: Optional[Info]) -> Any:
        if expr.slot not in frame.tmp_vars:
            raise PanRuntimeError("NameError", f"temp slot {expr.slot} is empty", expr.span)
        return frame.tmp_vars[expr.slot]

    def _score_submit(self, expr: ast.ScoreDbSubmit, frame: Frame, info: Optional[Info]) -> ScoreHandle:
        return self.session.score_db.submit(self.eval_expr(expr.value, frame, info))

    def _score_group_submit(self, expr: ast.ScoreDbGroupSubmit, frame: Frame, info: Optional[Info]) -> ScoreHandle:
        target = clone_value(self.eval_expr(expr.target, frame, info), {})
        label = self.eval_expr(expr.label, frame, info)
        if info is None:
            return self.session.score_db.submit_group(expr.evaluator, target, label)
        staged = self.session.score_db.stage_group(expr.evaluator, target, label)
        info.staged_groups.append(staged)
        return staged.handle

    # ----------------------------
    # Statements
    # ----------------------------

    def _assign(self, stmt: ast.Assign, frame: Frame, info: Optional[Info]) -> None:
        value = self.eval_expr(stmt.value, frame, info)
        target = stmt.target
        if isinstance(target, ast.Name):
            frame.locals[target.id] = value
        else:
            container = self.eval_expr(target.target, frame, info)
            index_set(container, self.eval_expr(target.index, frame, info), value)

    def _expr_stmt(self, stmt: ast.ExprStmt, frame: Frame, info: Optional[Info]) -> None:
        self.eval_expr(stmt.expr, frame, info)

    def _if(self, stmt: ast.If, frame: Frame, info: Optional[Info]) -> None:
        if truthy(self.eval_expr(stmt.cond, frame, info)):
            self.exec_block(stmt.then, frame, info)
        elif stmt.else_:
            self.exec_block(stmt.else_, frame, info)

    def _while(self, stmt: ast.While, frame: Frame, info: Optional[Info]) -> None:
        while truthy(self.eval_expr(stmt.cond, frame, info)):
            frame.tmp_vars.clear()
            try:
                self.exec_block(stmt.body, frame, info)
            except _Break:
                break
            except _Continue:
                continue

    def _for(self, stmt: ast.ForIn, frame: Frame, info: Optional[Info]) -> None:
        cursor = IterCursor(materialize_iterable(self.eval_expr(stmt.iterable, frame, info)))
        frame.tmp_vars.clear()
        frame.iterables.append(cursor)
        try:
            while not cursor.exhausted:
                frame.locals[stmt.var] = cursor.items[cursor.index]
                cursor.index += 1
                try:
                    self.exec_block(stmt.body, frame, info)
                except _Break:
                    break
                except _Continue:
                    continue
        finally:
            frame.iterables.pop()

    def _break(self, stmt: ast.Stmt, frame: Frame, info: Optional[Info]) -> None:
        raise _Break()

    def _continue(self, stmt: ast.Stmt, frame: Frame, info: Optional[Info]) -> None:
        raise _Continue()

    def _noop(self, stmt: ast.Stmt, frame: Frame, info: Optional[Info]) -> None:
        return None

    def _return(self, stmt: ast.Return, frame: Frame, info: Optional[Info]) -> None:
        value = None if stmt.value is None else self.eval_expr(stmt.value, frame, info)
        raise _ReturnSignal(value)

    def _temp_assign(self, stmt: ast.TempAssign, frame: Frame, info: Optional[Info]) -> None:
        frame.tmp_vars[stmt.slot] = self.eval_expr(stmt.value, frame, info)

    def _choose_materialize(self, stmt: ast.ChooseMaterialize, frame: Frame, info: Optional[Info]) -> None:
        choices = list(materialize_iterable(self.eval_expr(stmt.choices, frame, info)))
        frame.tmp_vars[choices_slot(stmt.slot)] = choices
        if not choices and info is not None:
            info.done_stepping = True

    def _info_set(self, stmt: ast.InfoSet, frame: Frame, info: Optional[Info]) -> None:
        if info is None:
            raise PanRuntimeError("TypeError", f"{stmt.key} needs a search context")
        value = self.eval_expr(stmt.value, frame, info)
        key = stmt.key
        if key == "early_stop_search":
            self.session.set_early_stop()
        elif key == "nocopy_add":
            info.nocopy.add(value)
        elif key == "nocopy_remove":
            if value not in info.nocopy:
                logger.warning(f"⚠️ needscopy {value} without an earlier nocopy has no effect")
            info.nocopy.discard(value)
        elif key == "optional_rv":
            info.optional_rv = clone_value(value, {})
        elif key == "costs":
            for name, amount in value.items():
                if not is_number(amount):
                    raise PanRuntimeError("TypeError", f"cost {name} must be a number, got {type_name(amount)}")
                if isinstance(amount, int):
                    check_int(amount)
                info.costs[name] = info.costs.get(name, 0) + amount
            self.session.add_costs(value)
        elif key == "score":
            info.score_handle = value
        else:
            raise PanRuntimeError("TypeError", f"unknown info field {key}")
