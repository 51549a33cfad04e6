# runtime/trampoline.py
"""Driver loop for compiled search spaces.

Every exit of a continuation body names its successor by label; `run`
keeps following labels until a body yields at a branchpoint or the
program reaches a terminal. Host stack depth stays constant no matter
how many loop iterations or nested calls a step goes through.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple, Union

from compiler.cps import (
    CompiledSearchSpace,
    CondJump,
    FinishExit,
    ForBreak,
    ForEnter,
    ForStep,
    Invoke,
    Jump,
    ReturnExit,
    Yield,
)
from runtime.errors import PanRuntimeError
from runtime.evaluator import Interpreter
from runtime.frame import Frame, IterCursor
from runtime.session import Info
from runtime.values import materialize_iterable, truthy

logger = logging.getLogger(__name__)

Observer = Callable[[str, Frame], None]


@dataclass
class Suspension:
    """The program stopped at a branchpoint site."""

    frame: Frame
    site: int
    slot: int
    resume: str
    params: Dict[str, Any]
    choose: bool


@dataclass
class Outcome:
    """The program reached a terminal."""

    kind: str  # "finish", "return" or "killed"
    value: Any
    frame: Frame


StepResult = Union[Suspension, Outcome]


class Trampoline:
    def __init__(self, space: CompiledSearchSpace, interpreter: Interpreter, observer: Optional[Observer] = None):
        self.space = space
        self.interpreter = interpreter
        self.observer = observer

    def start(self, args: Dict[str, Any], info: Info) -> StepResult:
        frame = Frame(self.space.entry, dict(args))
        return self.run(self.space.entry_label, frame, info)

    def resume(self, suspension: Suspension, value: Any, frame: Frame, info: Info) -> StepResult:
        """Bind the resume value into the site's temp slot of `frame` and keep going."""
        frame.tmp_vars[suspension.slot] = value
        return self.run(suspension.resume, frame, info)

    def run(self, label: str, frame: Frame, info: Info) -> StepResult:
        bodies = self.space.bodies
        interp = self.interpreter
        while True:
            body = bodies[label]
            if self.observer is not None:
                self.observer(label, frame)
            for op in body.ops:
                interp.exec_op(op, frame, info)

            exit = body.exit
            if isinstance(exit, Jump):
                label = exit.target
            elif isinstance(exit, CondJump):
                cond = self._eval(exit.cond, frame, info)
                frame.tmp_vars.clear()
                label = exit.then if truthy(cond) else exit.else_
            elif isinstance(exit, ForEnter):
                items = materialize_iterable(self._eval(exit.iterable, frame, info))
                frame.tmp_vars.clear()
                frame.iterables.append(IterCursor(items))
                label = exit.header
            elif isinstance(exit, ForStep):
                cursor = frame.iterables[-1]
                if cursor.exhausted:
                    frame.iterables.pop()
                    label = exit.done
                else:
                    frame.locals[exit.var] = cursor.items[cursor.index]
                    cursor.index += 1
                    label = exit.body
            elif isinstance(exit, ForBreak):
                frame.iterables.pop()
                label = exit.target
            elif isinstance(exit, Yield):
                params = {name: self._eval(expr, frame, info) for name, expr in exit.kwargs}
                return Suspension(frame, exit.site, exit.slot, exit.resume, params, exit.choose)
            elif isinstance(exit, Invoke):
                label, frame = self._invoke(exit, frame, info)
            elif isinstance(exit, ReturnExit):
                value = None if exit.value is None else self._eval(exit.value, frame, info)
                if frame.caller_frame is None:
                    return Outcome("return", value, frame)
                label, frame = self._return_to_caller(frame, value)
            elif isinstance(exit, FinishExit):
                value = None if exit.value is None else self._eval(exit.value, frame, info)
                if exit.killed:
                    info.killed = True
                    return Outcome("killed", value, frame)
                if frame.caller_frame is None:
                    return Outcome("finish", value, frame)
                label, frame = self._return_to_caller(frame, None)
            else:
                raise PanRuntimeError("TypeError", f"unknown exit {type(exit).__name__} in {label}")

    def _eval(self, expr, frame: Frame, info: Info) -> Any:
        try:
            return self.interpreter.eval_expr(expr, frame, info)
        except PanRuntimeError as e:
            raise e.with_span(expr.span)

    def _invoke(self, exit: Invoke, frame: Frame, info: Info) -> Tuple[str, Frame]:
        entry = self.space.functions[exit.callee]
        args = [self._eval(a, frame, info) for a in exit.args]
        if len(args) != len(entry.params):
            raise PanRuntimeError(
                "TypeError", f"function {exit.callee} expects {len(entry.params)} arguments, got {len(args)}"
            )
        child = Frame(exit.callee, dict(zip(entry.params, args)), caller_frame=frame, return_to=(exit.resume, exit.slot))
        return entry.entry_label, child

    @staticmethod
    def _return_to_caller(frame: Frame, value: Any) -> Tuple[str, Frame]:
        caller = frame.caller_frame
        resume, slot = frame.return_to
        caller.tmp_vars[slot] = value
        return resume, caller
