# runtime/frame.py
from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Tuple

from runtime.errors import PanRuntimeError
from runtime.values import clone_value


class IterCursor:
    """Snapshot of a for-loop iterable plus the position of the next element."""

    __slots__ = ("items", "index", "mutable")

    def __init__(self, items: Tuple[Any, ...], index: int = 0, mutable: Optional[bool] = None):
        self.items = items
        self.index = index
        # Snapshots of immutable elements can be shared between clones.
        self.mutable = any(isinstance(x, (list, dict)) for x in items) if mutable is None else mutable

    @property
    def exhausted(self) -> bool:
        return self.index >= len(self.items)

    def __repr__(self) -> str:
        return f"IterCursor({self.index}/{len(self.items)})"


class Frame:
    __slots__ = ("function", "locals", "caller_frame", "enclosing_frame", "tmp_vars", "iterables", "return_to")

    def __init__(
        self,
        function: str,
        locals: Optional[Dict[str, Any]] = None,
        caller_frame: Optional["Frame"] = None,
        enclosing_frame: Optional["Frame"] = None,
        return_to: Optional[Tuple[str, int]] = None,
    ):
        self.function = function
        self.locals: Dict[str, Any] = locals if locals is not None else {}
        self.caller_frame = caller_frame
        self.enclosing_frame = enclosing_frame
        self.tmp_vars: Dict[Any, Any] = {}
        self.iterables: List[IterCursor] = []
        # (resume label in the caller, caller temp slot receiving the return value)
        self.return_to = return_to

    def lookup(self, name: str) -> Any:
        frame: Optional[Frame] = self
        while frame is not None:
            if name in frame.locals:
                return frame.locals[name]
            frame = frame.enclosing_frame
        raise PanRuntimeError("NameError", f"name {name} is not defined")

    def chain(self) -> Iterable["Frame"]:
        frame: Optional[Frame] = self
        while frame is not None:
            yield frame
            frame = frame.caller_frame

    @property
    def depth(self) -> int:
        return sum(1 for _ in self.chain())

    def __repr__(self) -> str:
        return f"Frame({self.function}, locals={sorted(self.locals)}, depth={self.depth})"


def _clone_one(frame: Frame, nocopy: frozenset, memo: Dict[int, Any]) -> Frame:
    clone = Frame.__new__(Frame)
    clone.function = frame.function
    clone.locals = {
        name: value if name in nocopy else clone_value(value, memo) for name, value in frame.locals.items()
    }
    clone.tmp_vars = {slot: clone_value(value, memo) for slot, value in frame.tmp_vars.items()}
    clone.iterables = [
        IterCursor(tuple(clone_value(x, memo) for x in c.items) if c.mutable else c.items, c.index, c.mutable)
        for c in frame.iterables
    ]
    clone.return_to = frame.return_to
    clone.caller_frame = None
    clone.enclosing_frame = None
    return clone


def _shared_cells(frames: Iterable[Frame], nocopy: frozenset) -> Dict[int, Any]:
    memo: Dict[int, Any] = {}
    if nocopy:
        for f in frames:
            for name in nocopy:
                value = f.locals.get(name)
                if isinstance(value, (list, dict)):
                    memo[id(value)] = value
    return memo


def frame_clone(frame: Frame, nocopy: Iterable[str] = ()) -> Frame:
    """Deep copy of a frame and its caller/enclosing chain.

    Names in `nocopy` keep pointing at the same reference cell in every
    frame of the chain, and any other alias of those cells stays shared too.
    """
    nocopy = frozenset(nocopy)
    if frame.caller_frame is None and frame.enclosing_frame is None:
        return _clone_one(frame, nocopy, _shared_cells((frame,), nocopy))

    # iterative so deep caller chains never touch the host recursion limit
    frames = _all_frames(frame)
    memo = _shared_cells(frames, nocopy)
    clones = {id(f): _clone_one(f, nocopy, memo) for f in frames}
    for f in frames:
        c = clones[id(f)]
        if f.caller_frame is not None:
            c.caller_frame = clones[id(f.caller_frame)]
        if f.enclosing_frame is not None:
            c.enclosing_frame = clones[id(f.enclosing_frame)]
    return clones[id(frame)]


def _all_frames(frame: Frame) -> List[Frame]:
    seen: Dict[int, Frame] = {id(frame): frame}
    stack = [frame]
    while stack:
        f = stack.pop()
        for linked in (f.caller_frame, f.enclosing_frame):
            if linked is not None and id(linked) not in seen:
                seen[id(linked)] = linked
                stack.append(linked)
    return list(seen.values())
