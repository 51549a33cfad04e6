# runtime/scoredb.py
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from runtime.errors import PanRuntimeError
from runtime.values import dumps, is_number, type_name

logger = logging.getLogger(__name__)

GroupCall = Callable[[str, List[Any]], Any]


class ScoreHandle:
    """A score that may still be waiting on a group evaluation."""

    __slots__ = ("value", "label")

    def __init__(self, value: Optional[float] = None, label: Optional[str] = None):
        self.value = value
        self.label = label

    @property
    def pending(self) -> bool:
        return self.value is None

    def __repr__(self) -> str:
        state = "pending" if self.pending else self.value
        return f"ScoreHandle({state}, label={self.label})"


@dataclass
class StagedGroupScore:
    """A group submission waiting for its segment to finish."""

    evaluator: str
    key: str
    target: Any
    handle: ScoreHandle


@dataclass
class _Group:
    evaluator: str
    targets: List[Any] = field(default_factory=list)
    handles: List[ScoreHandle] = field(default_factory=list)
    dirty: bool = False


def _check_score(value: Any) -> float:
    if not is_number(value):
        raise PanRuntimeError("TypeError", f"score must be a number, got {type_name(value)}")
    return value


class ScoreDb:
    def __init__(self):
        self._groups: Dict[str, _Group] = {}
        self._lock = threading.RLock()

    def submit(self, value: Any) -> ScoreHandle:
        return ScoreHandle(_check_score(value))

    def submit_group(self, evaluator: str, target: Any, label: Any) -> ScoreHandle:
        staged = self.stage_group(evaluator, target, label)
        self.commit([staged])
        return staged.handle

    def stage_group(self, evaluator: str, target: Any, label: Any) -> StagedGroupScore:
        """A pending handle for `target`; it joins the label's group only once committed."""
        key = dumps(label)
        with self._lock:
            self._check_evaluator(key, evaluator)
        return StagedGroupScore(evaluator, key, target, ScoreHandle(label=key))

    def commit(self, staged: List[StagedGroupScore]) -> None:
        with self._lock:
            for entry in staged:
                self._check_evaluator(entry.key, entry.evaluator)
                group = self._groups.get(entry.key)
                if group is None:
                    group = self._groups[entry.key] = _Group(entry.evaluator)
                group.targets.append(entry.target)
                group.handles.append(entry.handle)
                group.dirty = True

    def _check_evaluator(self, key: str, evaluator: str) -> None:
        group = self._groups.get(key)
        if group is not None and group.evaluator != evaluator:
            raise PanRuntimeError("TypeError", f"label {key} is evaluated by {group.evaluator}, not {evaluator}")

    @property
    def pending_labels(self) -> List[str]:
        with self._lock:
            return [key for key, group in self._groups.items() if group.dirty]

    def targets(self, label: Any) -> List[Any]:
        with self._lock:
            group = self._groups.get(dumps(label))
            return list(group.targets) if group else []

    def flush(self, call: GroupCall) -> int:
        """Re-evaluate every label with new submissions; returns the number of handles written."""
        written = 0
        with self._lock:
            for key, group in self._groups.items():
                if not group.dirty:
                    continue
                try:
                    scores = call(group.evaluator, list(group.targets))
                except PanRuntimeError as e:
                    raise PanRuntimeError("GroupEvalError", f"{group.evaluator} failed on label {key}: {e}", e.span)
                if not isinstance(scores, list) or len(scores) != len(group.targets):
                    got = len(scores) if isinstance(scores, list) else type_name(scores)
                    raise PanRuntimeError(
                        "TypeError",
                        f"group evaluator {group.evaluator} returned {got} scores for {len(group.targets)} targets",
                    )
                for handle, score in zip(group.handles, scores):
                    handle.value = _check_score(score)
                written += len(group.handles)
                group.dirty = False
                logger.debug(f"🔄 Group scores for label {key}: {scores}")
        return written
