# compiler/cps.py
"""CPS conversion of normalized PanScript into a graph of continuation bodies.

Each body runs a straight-line list of plain statements and then leaves
through exactly one exit. Exits name the next body by label instead of
calling it, so the driver in runtime.trampoline never grows the host stack.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple, Union

from lang import ast_nodes as ast
from lang.diagnostics import NO_SPAN, PanError, Span

from compiler.preprocess import preprocess

logger = logging.getLogger(__name__)


class CompileError(PanError):
    def __init__(self, message: str, span: Span = NO_SPAN):
        super().__init__(f"{span}: {message}" if span != NO_SPAN else message)
        self.message = message
        self.span = span


# ----------------------------
# Exits
# ----------------------------

@dataclass(frozen=True)
class Jump:
    target: str


@dataclass(frozen=True)
class CondJump:
    cond: ast.Expr
    then: str
    else_: str


@dataclass(frozen=True)
class ForEnter:
    iterable: ast.Expr
    header: str


@dataclass(frozen=True)
class ForStep:
    var: str
    body: str
    done: str


@dataclass(frozen=True)
class ForBreak:
    target: str


@dataclass(frozen=True)
class Yield:
    site: int
    slot: int
    resume: str
    kwargs: ast.Kwargs
    choose: bool = False


@dataclass(frozen=True)
class Invoke:
    callee: str
    args: Tuple[ast.Expr, ...]
    slot: int
    resume: str


@dataclass(frozen=True)
class ReturnExit:
    value: Optional[ast.Expr]


@dataclass(frozen=True)
class FinishExit:
    value: Optional[ast.Expr]
    killed: bool = False


Exit = Union[Jump, CondJump, ForEnter, ForStep, ForBreak, Yield, Invoke, ReturnExit, FinishExit]


@dataclass(frozen=True)
class ContinuationBody:
    label: str
    function: str
    ops: Tuple[ast.Stmt, ...]
    exit: Exit


@dataclass(frozen=True)
class SiteInfo:
    id: int
    name: Optional[str]
    span: Span
    function: str
    kind: str  # "branchpoint" or "choose"


@dataclass(frozen=True)
class FunctionEntry:
    name: str
    params: Tuple[str, ...]
    entry_label: str


@dataclass(frozen=True)
class CompiledSearchSpace:
    entry: str
    functions: Mapping[str, FunctionEntry]
    bodies: Mapping[str, ContinuationBody]
    sites: Tuple[SiteInfo, ...]
    normalized: ast.SourceProgram
    source: ast.SourceProgram

    @property
    def entry_label(self) -> str:
        return self.functions[self.entry].entry_label

    @property
    def entry_params(self) -> Tuple[str, ...]:
        return self.functions[self.entry].params

    def site(self, site_id: int) -> SiteInfo:
        return self.sites[site_id]


@dataclass(frozen=True)
class _Context:
    continue_to: Optional[str] = None
    break_to: Optional[str] = None
    in_for: bool = False
    join: Optional[str] = None


def _is_yield_assign(stmt: ast.Stmt) -> bool:
    return isinstance(stmt, ast.TempAssign) and isinstance(stmt.value, (ast.Branchpoint, ast.ChooseSite, ast.Searchover))


def _needs_cps(stmt: ast.Stmt, loop_depth: int) -> bool:
    if _is_yield_assign(stmt):
        return True
    if isinstance(stmt, (ast.ReturnCallback, ast.FinishCallback)):
        return True
    if isinstance(stmt, (ast.BreakCallback, ast.ContinueCallback)):
        return loop_depth == 0
    if isinstance(stmt, ast.If):
        return any(_needs_cps(s, loop_depth) for s in stmt.then + (stmt.else_ or ()))
    if isinstance(stmt, (ast.While, ast.ForIn)):
        return any(_needs_cps(s, loop_depth + 1) for s in stmt.body)
    return False


def is_cps_relevant(stmt: ast.Stmt) -> bool:
    """True when the statement cannot run as one plain operation."""
    return isinstance(stmt, ast.TERMINALS) or _needs_cps(stmt, 0)


class CpsCompiler:
    def __init__(self, normalized: ast.SourceProgram, source: ast.SourceProgram, entry: str):
        self.normalized = normalized
        self.source = source
        self.entry = entry
        self.bodies: Dict[str, ContinuationBody] = {}
        self.order: List[str] = []
        self.sites: List[SiteInfo] = []
        self._site_of: Dict[int, int] = {}
        self._fn = ""
        self._counter = 0

    # ----------------------------
    # Driver
    # ----------------------------

    def compile(self) -> CompiledSearchSpace:
        if self.normalized.function(self.entry) is None:
            raise CompileError(f"entry function {self.entry} is not defined")
        self._number_sites()

        functions: Dict[str, FunctionEntry] = {}
        for fn in self.normalized.function_defs:
            self._fn = fn.name
            self._counter = 0
            label = self.compile_concat(fn.body, _Context(), label=f"{fn.name}:entry")
            functions[fn.name] = FunctionEntry(fn.name, fn.params, label)

        ordered = {label: self.bodies[label] for label in self.order}
        logger.debug(f"🔄 Compiled '{self.entry}': {len(ordered)} bodies, {len(self.sites)} sites")
        return CompiledSearchSpace(
            entry=self.entry,
            functions=MappingProxyType(functions),
            bodies=MappingProxyType(ordered),
            sites=tuple(self.sites),
            normalized=self.normalized,
            source=self.source,
        )

    def _number_sites(self) -> None:
        for fn in self.normalized.function_defs:
            allowed = set()
            for node in fn.walk():
                if isinstance(node, ast.TempAssign) and isinstance(node.value, ast.LIFTED + (ast.ChooseSite,)):
                    allowed.add(id(node.value))
                    if isinstance(node.value, (ast.Branchpoint, ast.ChooseSite)):
                        self._add_site(fn.name, node.value)
                elif isinstance(node, ast.LIFTED + (ast.ChooseSite,)) and id(node) not in allowed:
                    raise CompileError(
                        f"{type(node).__name__.lower()} is nested inside an expression or unsupported construct",
                        node.span,
                    )

    def _add_site(self, function: str, node: Union[ast.Branchpoint, ast.ChooseSite]) -> None:
        name = None
        for key, value in node.kwargs:
            if key == "name" and isinstance(value, ast.Literal) and isinstance(value.value, str):
                name = value.value
        kind = "choose" if isinstance(node, ast.ChooseSite) else "branchpoint"
        site_id = len(self.sites)
        self._site_of[id(node)] = site_id
        self.sites.append(SiteInfo(site_id, name, node.span, function, kind))

    def _new_label(self, name: Optional[str] = None) -> str:
        if name is None:
            self._counter += 1
            name = f"{self._fn}:{self._counter}"
        if name in self.bodies or name in self.order:
            raise CompileError(f"duplicate continuation label {name}")
        self.order.append(name)
        return name

    def _store(self, label: str, ops: List[ast.Stmt], exit: Exit) -> None:
        self.bodies[label] = ContinuationBody(label, self._fn, tuple(ops), exit)

    # ----------------------------
    # Rules
    # ----------------------------

    def compile_concat(self, stmts: ast.Block, ctx: _Context, label: Optional[str] = None) -> str:
        """Plain prefix runs in this body; the first CPS-relevant statement decides the exit."""
        label = self._new_label(label)
        ops: List[ast.Stmt] = []
        for i, stmt in enumerate(stmts):
            if not is_cps_relevant(stmt):
                ops.append(stmt)
                continue
            rest = stmts[i + 1:]
            if isinstance(stmt, ast.TERMINALS):
                exit = self._terminal(stmt, ctx)
                if rest:
                    # unreachable, compiled so its sites stay in the table
                    self.compile_concat(rest, ctx)
            else:
                if not rest:
                    raise CompileError("statement list does not end in a terminal callback", stmt.span)
                resume = None
                if isinstance(stmt, ast.TempAssign) and id(stmt.value) in self._site_of:
                    resume = f"{self._fn}:bp#{self._site_of[id(stmt.value)]}"
                rest_label = self.compile_concat(rest, ctx, label=resume)
                exit = self._statement(stmt, rest_label, ctx)
            self._store(label, ops, exit)
            return label
        span = stmts[-1].span if stmts else NO_SPAN
        raise CompileError("statement list does not end in a terminal callback", span)

    def _statement(self, stmt: ast.Stmt, rest: str, ctx: _Context) -> Exit:
        if isinstance(stmt, ast.TempAssign):
            value = stmt.value
            if isinstance(value, (ast.Branchpoint, ast.ChooseSite)):
                return self.compile_branchpoint_site(stmt, rest)
            if isinstance(value, ast.Searchover):
                return self.compile_searchover_call(stmt, rest)
        if isinstance(stmt, ast.If):
            return self.compile_ifelse(stmt, rest, ctx)
        if isinstance(stmt, ast.While):
            return self.compile_while(stmt, rest)
        if isinstance(stmt, ast.ForIn):
            return self.compile_for(stmt, rest)
        raise CompileError(f"cannot compile {type(stmt).__name__} containing a branchpoint", stmt.span)

    def _terminal(self, stmt: ast.Stmt, ctx: _Context) -> Exit:
        if isinstance(stmt, ast.ReturnCallback):
            return ReturnExit(stmt.value)
        if isinstance(stmt, ast.FinishCallback):
            return FinishExit(stmt.value, stmt.killed)
        if isinstance(stmt, ast.ContinueCallback):
            if ctx.continue_to is None:
                raise CompileError("continue outside loop", stmt.span)
            return Jump(ctx.continue_to)
        if isinstance(stmt, ast.BreakCallback):
            if ctx.break_to is None:
                raise CompileError("break outside loop", stmt.span)
            return ForBreak(ctx.break_to) if ctx.in_for else Jump(ctx.break_to)
        if ctx.join is None:
            raise CompileError("if/else callback outside an if statement", stmt.span)
        return Jump(ctx.join)

    def compile_while(self, stmt: ast.While, rest: str) -> Exit:
        header = self._new_label()
        body = self.compile_concat(stmt.body, _Context(continue_to=header, break_to=rest))
        self.bodies[header] = ContinuationBody(header, self._fn, (), CondJump(stmt.cond, body, rest))
        return Jump(header)

    def compile_for(self, stmt: ast.ForIn, rest: str) -> Exit:
        header = self._new_label()
        body = self.compile_concat(stmt.body, _Context(continue_to=header, break_to=rest, in_for=True))
        self.bodies[header] = ContinuationBody(header, self._fn, (), ForStep(stmt.var, body, rest))
        return ForEnter(stmt.iterable, header)

    def compile_ifelse(self, stmt: ast.If, rest: str, ctx: _Context) -> Exit:
        arm_ctx = _Context(ctx.continue_to, ctx.break_to, ctx.in_for, join=rest)
        then = self.compile_concat(stmt.then, arm_ctx)
        else_ = self.compile_concat(stmt.else_ or (ast.IfElseCallback(stmt.span),), arm_ctx)
        return CondJump(stmt.cond, then, else_)

    def compile_branchpoint_site(self, stmt: ast.TempAssign, rest: str) -> Exit:
        site = self._site_of[id(stmt.value)]
        return Yield(site, stmt.slot, rest, stmt.value.kwargs, isinstance(stmt.value, ast.ChooseSite))

    def compile_searchover_call(self, stmt: ast.TempAssign, rest: str) -> Exit:
        call = stmt.value
        if self.normalized.function(call.func) is None:
            raise CompileError(f"searchover target {call.func} is not a workflow function", call.span)
        return Invoke(call.func, call.args, stmt.slot, rest)


def compile_search_space(normalized: ast.SourceProgram, source: ast.SourceProgram, entry: str) -> CompiledSearchSpace:
    return CpsCompiler(normalized, source, entry).compile()


def compile_program(source: ast.SourceProgram, entry: str) -> CompiledSearchSpace:
    """Preprocess and CPS-convert `source` for the given entry function."""
    space = compile_search_space(preprocess(source, entry), source, entry)
    logger.info(f"✅ Compiled '{entry}' into {len(space.bodies)} continuation bodies")
    return space
