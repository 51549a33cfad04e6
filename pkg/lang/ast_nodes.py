# lang/ast_nodes.py
"""PanScript syntax tree.

Nodes are frozen dataclasses with tuple children so two trees compare
structurally. Spans never take part in equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Iterator, Optional, Tuple, Union

from lang.diagnostics import NO_SPAN, Span


@dataclass(frozen=True)
class Node:
    def children(self) -> Iterator["Node"]:
        for f in fields(self):
            if f.name == "span":
                continue
            yield from _nodes_in(getattr(self, f.name))

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(list(node.children())))


def _nodes_in(value: Any) -> Iterator[Node]:
    if isinstance(value, Node):
        yield value
    elif isinstance(value, tuple):
        for item in value:
            yield from _nodes_in(item)


# ----------------------------
# Expressions
# ----------------------------

@dataclass(frozen=True)
class Expr(Node):
    pass


@dataclass(frozen=True)
class Literal(Expr):
    value: Any
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Name(Expr):
    id: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str
    operand: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Index(Expr):
    target: Expr
    index: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ListLit(Expr):
    items: Tuple[Expr, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class MapLit(Expr):
    entries: Tuple[Tuple[Expr, Expr], ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)


Kwargs = Tuple[Tuple[str, Expr], ...]


@dataclass(frozen=True)
class Branchpoint(Expr):
    kwargs: Kwargs = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Choose(Expr):
    choices: Expr
    kwargs: Kwargs = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Protect(Expr):
    expr: Expr
    tag: str
    max_retries: Optional[Expr] = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Searchover(Expr):
    func: str
    args: Tuple[Expr, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Perform(Expr):
    op: str
    args: Tuple[Expr, ...] = ()
    kwargs: Kwargs = ()
    span: Span = field(default=NO_SPAN, compare=False)


# ----------------------------
# Statements
# ----------------------------

@dataclass(frozen=True)
class Stmt(Node):
    pass


Block = Tuple[Stmt, ...]


@dataclass(frozen=True)
class Assign(Stmt):
    target: Union[Name, Index]
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class NoCopyDecl(Stmt):
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class NeedsCopyDecl(Stmt):
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Block
    else_: Optional[Block] = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    body: Block
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ForIn(Stmt):
    var: str
    iterable: Expr
    body: Block
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Break(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Continue(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Return(Stmt):
    value: Optional[Expr] = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ExprStmt(Stmt):
    expr: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RecordScore(Stmt):
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RecordScoreGroup(Stmt):
    evaluator: str
    target: Expr
    label: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RecordCosts(Stmt):
    kwargs: Kwargs = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class EarlyStop(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class KillBranch(Stmt):
    value: Optional[Expr] = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class OptionalReturn(Stmt):
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class FunctionDef(Node):
    name: str
    params: Tuple[str, ...]
    body: Block
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SourceProgram(Node):
    function_defs: Tuple[FunctionDef, ...]
    path: str = field(default="<source>", compare=False)
    text: str = field(default="", compare=False, repr=False)

    def function(self, name: str) -> Optional[FunctionDef]:
        for fn in self.function_defs:
            if fn.name == name:
                return fn
        return None

    @property
    def function_names(self) -> Tuple[str, ...]:
        return tuple(fn.name for fn in self.function_defs)


# ----------------------------
# Normalized-only nodes (produced by compiler.preprocess)
# ----------------------------

@dataclass(frozen=True)
class TempRef(Expr):
    slot: int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ChooseSite(Expr):
    """Branchpoint half of a lifted choose; resumes with the cursor's element."""

    slot: int
    kwargs: Kwargs = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ScoreDbSubmit(Expr):
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ScoreDbGroupSubmit(Expr):
    evaluator: str
    target: Expr
    label: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class TempAssign(Stmt):
    slot: int
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ChooseMaterialize(Stmt):
    slot: int
    choices: Expr
    span: Span = field(default=NO_SPAN, compare=False)


INFO_FIELDS = frozenset(["early_stop_search", "nocopy_add", "nocopy_remove", "optional_rv", "costs", "score"])


@dataclass(frozen=True)
class InfoSet(Stmt):
    key: str
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class FinishCallback(Stmt):
    value: Optional[Expr] = None
    killed: bool = False
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ReturnCallback(Stmt):
    value: Optional[Expr] = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class BreakCallback(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ContinueCallback(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class IfElseCallback(Stmt):
    span: Span = field(default=NO_SPAN, compare=False)


TERMINALS = (FinishCallback, ReturnCallback, BreakCallback, ContinueCallback, IfElseCallback)
YIELDING = (Branchpoint, Choose, ChooseSite, Searchover)
LIFTED = (Branchpoint, Choose, Protect, Searchover)
