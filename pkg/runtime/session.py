# runtime/session.py
from __future__ import annotations

import logging
import threading
from collections import Counter
from typing import Any, Dict, List, Optional, Set

import numpy as np

from runtime.provider import EffectProvider
from runtime.scoredb import ScoreDb, ScoreHandle, StagedGroupScore
from runtime.values import NO_VALUE

logger = logging.getLogger(__name__)


class SessionState:
    """State shared by every branch of one search session."""

    def __init__(self, seed: int = 0, provider: Optional[EffectProvider] = None, tracer: Any = None):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.provider = provider if provider is not None else EffectProvider(seed=seed)
        self.tracer = tracer
        self.score_db = ScoreDb()
        self.aggregate_costs: Dict[str, float] = {}
        self.branchpoint_step_counts: Counter = Counter()
        self.step_calls = 0
        self._early_stop = False
        self._lock = threading.RLock()

    @property
    def early_stop(self) -> bool:
        return self._early_stop

    def set_early_stop(self) -> None:
        # monotone: there is no way back to False
        if not self._early_stop:
            logger.info("⚠️ Early stop requested; no new steps will be scheduled")
        self._early_stop = True

    def add_costs(self, costs: Dict[str, float]) -> None:
        with self._lock:
            for key, value in costs.items():
                self.aggregate_costs[key] = self.aggregate_costs.get(key, 0) + value

    def count_step(self, site_name: Optional[str]) -> None:
        with self._lock:
            self.step_calls += 1
            if site_name is not None:
                self.branchpoint_step_counts[site_name] += 1

    def zero_branchpoint_counts(self) -> None:
        with self._lock:
            self.branchpoint_step_counts.clear()

    def costs_snapshot(self) -> Dict[str, float]:
        with self._lock:
            return dict(self.aggregate_costs)


class Info:
    """Per-branch search metadata carried next to the frame."""

    __slots__ = (
        "session", "score_handle", "nocopy", "optional_rv", "costs", "done_stepping", "killed", "staged_groups"
    )

    def __init__(self, session: SessionState):
        self.session = session
        self.score_handle: Optional[ScoreHandle] = None
        self.nocopy: Set[str] = set()
        self.optional_rv: Any = NO_VALUE
        self.costs: Dict[str, float] = {}
        self.done_stepping = False
        self.killed = False
        self.staged_groups: List[StagedGroupScore] = []

    def copy(self) -> "Info":
        clone = Info.__new__(Info)
        clone.session = self.session
        clone.score_handle = self.score_handle
        clone.nocopy = set(self.nocopy)
        clone.optional_rv = self.optional_rv
        clone.costs = dict(self.costs)
        clone.done_stepping = self.done_stepping
        clone.killed = self.killed
        clone.staged_groups = list(self.staged_groups)
        return clone

    def begin_transition(self) -> None:
        """Reset the fields that only describe the segment about to run."""
        self.costs = {}
        self.optional_rv = NO_VALUE
        self.done_stepping = False
        self.staged_groups = []

    def commit_group_scores(self) -> None:
        """Hand the segment's group submissions to the score database."""
        if self.staged_groups:
            self.session.score_db.commit(self.staged_groups)
            self.staged_groups = []

    @property
    def score(self) -> Optional[float]:
        return None if self.score_handle is None else self.score_handle.value

    def __repr__(self) -> str:
        return f"Info(score={self.score}, nocopy={sorted(self.nocopy)}, costs={self.costs})"


def info_copy(info: Info) -> Info:
    return info.copy()
