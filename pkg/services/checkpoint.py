# services/checkpoint.py
"""Checkpoints: resumable program states at branchpoints and terminals.

A checkpoint is never mutated by stepping. `step` clones the frame
(honoring nocopy names), copies the info, and runs the compiled program
to the next branchpoint or terminal, producing a new child checkpoint.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from compiler.cps import CompiledSearchSpace
from runtime.errors import CheckpointError, PanRuntimeError, ProtectExhausted, ProtectTriggered
from runtime.evaluator import Interpreter, choices_slot
from runtime.frame import Frame, frame_clone
from runtime.scoredb import ScoreHandle
from runtime.session import Info, SessionState, info_copy
from runtime.trampoline import Observer, Outcome, StepResult, Suspension, Trampoline
from runtime.values import NO_VALUE, clone_value
from services.trace import SearchTreeTrace

logger = logging.getLogger(__name__)

# Resamples allowed for a protect with no max_retries when no budget is given either.
DEFAULT_PROTECT_RETRIES = 100


class Status(str, Enum):
    RUNNING = "RUNNING"
    DONE_STEPPING = "DONE_STEPPING"
    RETURNED = "RETURNED"
    KILLED = "KILLED"


class ProtectionBudget:
    """Total number of protect resamples a step (or a sampler stream) may spend."""

    def __init__(self, limit: Optional[int] = None):
        if limit is not None and limit < 0:
            raise CheckpointError(f"max_protection must be non-negative, got {limit}")
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    def spend(self) -> bool:
        with self._lock:
            if self.limit is not None and self.used >= self.limit:
                return False
            self.used += 1
            return True


def run_protected(
    attempt: Callable[[], Tuple[StepResult, Info]], budget: ProtectionBudget
) -> Tuple[StepResult, Info, int]:
    """Re-run a whole segment while a protected expression keeps failing with its tag.

    Group scores submitted by an attempt are committed only when the attempt
    reaches a branchpoint or returns; discarded and killed segments never vote.
    """
    failures: Dict[Any, int] = {}
    resamples = 0
    while True:
        try:
            result, info = attempt()
            if not (isinstance(result, Outcome) and result.kind == "killed"):
                info.commit_group_scores()
            return result, info, resamples
        except ProtectTriggered as trigger:
            failures[trigger.key] = failures.get(trigger.key, 0) + 1
            allowed = trigger.max_retries
            if allowed is None and budget.limit is None:
                allowed = DEFAULT_PROTECT_RETRIES
            if (allowed is not None and failures[trigger.key] > allowed) or not budget.spend():
                attempts = failures[trigger.key]
                logger.debug(f"❌ protect({trigger.tag}) exhausted after {attempts} attempts")
                raise ProtectExhausted(trigger.tag, attempts, trigger.cause)
            resamples += 1
            logger.debug(f"🔄 protect({trigger.tag}) resampling segment, attempt {failures[trigger.key] + 1}")


class SearchRuntime:
    """Compiled program plus the interpreter and driver shared by one checkpoint tree."""

    def __init__(self, space: CompiledSearchSpace, session: SessionState, observer: Optional[Observer] = None):
        self.space = space
        self.session = session
        self.interpreter = Interpreter(space.source, session)
        self.trampoline = Trampoline(space, self.interpreter, observer)

    def flush_scores(self) -> int:
        return self.session.score_db.flush(lambda name, targets: self.interpreter.call_function(name, [targets]))

    def site_name(self, site: Optional[int]) -> Optional[str]:
        return None if site is None else self.space.site(site).name


class Checkpoint:
    def __init__(
        self,
        runtime: SearchRuntime,
        frame: Frame,
        info: Info,
        status: Status,
        suspension: Optional[Suspension] = None,
        return_value: Any = NO_VALUE,
        error: Optional[PanRuntimeError] = None,
        parent: Optional["Checkpoint"] = None,
        protect_resamples: int = 0,
    ):
        self.runtime = runtime
        self.frame = frame
        self.info = info
        self.status = status
        self.suspension = suspension
        self.error = error
        self.parent = parent
        self.depth = 0 if parent is None else parent.depth + 1
        self.protect_resamples = protect_resamples
        self.node_id: Optional[int] = None
        self._return_value = return_value
        self._next_choice = 0
        self._choice_lock = threading.Lock()

    # ----------------------------
    # Construction
    # ----------------------------

    @classmethod
    def start(
        cls,
        space: CompiledSearchSpace,
        args: Optional[Dict[str, Any]] = None,
        session: Optional[SessionState] = None,
        max_protection: Optional[int] = None,
        observer: Optional[Observer] = None,
    ) -> "Checkpoint":
        """Run the entry function until the first branchpoint or terminal."""
        session = session if session is not None else SessionState()
        if session.tracer is None:
            session.tracer = SearchTreeTrace()
        args = dict(args or {})
        expected = list(space.entry_params)
        if sorted(args) != sorted(expected):
            raise CheckpointError(f"{space.entry} expects arguments {expected}, got {sorted(args)}")
        runtime = SearchRuntime(space, session, observer)

        def attempt() -> Tuple[StepResult, Info]:
            info = Info(session)
            memo: Dict[int, Any] = {}
            return runtime.trampoline.start({k: clone_value(v, memo) for k, v in args.items()}, info), info

        result, info, resamples = run_protected(attempt, ProtectionBudget(max_protection))
        root = cls._from_result(runtime, result, info, parent=None, resamples=resamples)
        runtime.flush_scores()
        root.node_id = session.tracer.record(
            None, root.site, root.site_name, root.status.value, root.score_handle, info.costs, 0
        )
        logger.debug(f"🔄 Started '{space.entry}': {root}")
        return root

    @classmethod
    def _from_result(
        cls, runtime: SearchRuntime, result: StepResult, info: Info, parent: Optional["Checkpoint"], resamples: int
    ) -> "Checkpoint":
        if isinstance(result, Suspension):
            return cls(runtime, result.frame, info, Status.RUNNING, result, parent=parent, protect_resamples=resamples)
        assert isinstance(result, Outcome)
        if result.kind == "killed":
            return cls(runtime, result.frame, info, Status.KILLED, return_value=result.value, parent=parent,
                       protect_resamples=resamples)
        return cls(runtime, result.frame, info, Status.RETURNED, return_value=result.value, parent=parent,
                   protect_resamples=resamples)

    # ----------------------------
    # Stepping
    # ----------------------------

    def _take_choice(self) -> int:
        with self._choice_lock:
            index = self._next_choice
            self._next_choice += 1
            return index

    def step(
        self, message_to_agent: Any = None, flush_scores: bool = True, max_protection: Optional[int] = None
    ) -> "Checkpoint":
        """Sample one child state."""
        budget = ProtectionBudget(max_protection if max_protection is not None else self._site_budget())
        return self._step(message_to_agent, flush_scores, budget, self._take_choice() if self.is_choose else None)

    def _site_budget(self) -> Optional[int]:
        value = self.get_branchpoint_param("max_protection")
        return value if isinstance(value, int) and not isinstance(value, bool) else None

    def _step(
        self, message_to_agent: Any, flush_scores: bool, budget: ProtectionBudget, choice: Optional[int]
    ) -> "Checkpoint":
        if self.status != Status.RUNNING:
            raise CheckpointError(f"cannot step a checkpoint with status {self.status.value}")
        session = self.runtime.session
        after_early_stop = session.early_stop
        session.count_step(self.site_name)

        if choice is not None and (self.info.done_stepping or choice >= len(self._choices())):
            child = Checkpoint(self.runtime, self.frame, info_copy(self.info), Status.DONE_STEPPING, parent=self)
            return self._finish_step(child, after_early_stop, flush=False)

        suspension = self.suspension
        latest: List[Info] = []

        def attempt() -> Tuple[StepResult, Info]:
            frame = frame_clone(self.frame, self.info.nocopy)
            info = info_copy(self.info)
            info.begin_transition()
            latest[:] = [info]
            if choice is not None:
                value = frame.tmp_vars[choices_slot(suspension.slot)][choice]
            else:
                value = clone_value(message_to_agent, {})
            return self.runtime.trampoline.resume(suspension, value, frame, info), info

        try:
            result, info, resamples = run_protected(attempt, budget)
        except ProtectExhausted:
            session.tracer.record(
                self.node_id, None, None, "PROTECT_EXHAUSTED", self.score_handle, {}, self.depth + 1, after_early_stop
            )
            raise
        except PanRuntimeError as e:
            # keep the failed segment's costs on the killed node
            info = latest[0] if latest else info_copy(self.info)
            info.killed = True
            child = Checkpoint(self.runtime, self.frame, info, Status.KILLED, error=e, parent=self)
            logger.debug(f"⚠️ Branch killed by {e.tag}: {e.message}")
            return self._finish_step(child, after_early_stop, flush=flush_scores)

        child = self._from_result(self.runtime, result, info, parent=self, resamples=resamples)
        return self._finish_step(child, after_early_stop, flush=flush_scores)

    def _finish_step(self, child: "Checkpoint", after_early_stop: bool, flush: bool) -> "Checkpoint":
        if flush:
            self.runtime.flush_scores()
        child.node_id = self.runtime.session.tracer.record(
            self.node_id,
            child.site,
            child.site_name,
            child.status.value,
            child.score_handle,
            child.info.costs if child.status != Status.DONE_STEPPING else {},
            child.depth,
            after_early_stop,
        )
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"🔄 Step from node {self.node_id}: {child}")
        return child

    def step_sampler(
        self,
        max_samples: Optional[int] = None,
        max_protection: Optional[int] = None,
        message_to_agent: Any = None,
        flush_scores: bool = True,
    ) -> Iterator["Checkpoint"]:
        """Yield children until max_samples, choice exhaustion or protect exhaustion.

        `max_protection` is one budget shared by the whole stream.
        """
        budget = ProtectionBudget(max_protection) if max_protection is not None else None
        produced = 0
        while max_samples is None or produced < max_samples:
            if self.remaining_choices == 0:
                return
            step_budget = budget if budget is not None else ProtectionBudget(self._site_budget())
            try:
                child = self._step(
                    message_to_agent, flush_scores, step_budget, self._take_choice() if self.is_choose else None
                )
            except ProtectExhausted as e:
                logger.warning(f"⚠️ Sampler stopped: {e}")
                return
            if child.status == Status.DONE_STEPPING:
                return
            produced += 1
            yield child

    def parallel_step_sampler(
        self,
        max_samples: Optional[int] = None,
        max_workers: int = 4,
        chunk_size: Optional[int] = None,
        max_protection: Optional[int] = None,
        flush_scores: bool = True,
    ) -> List["Checkpoint"]:
        """Step concurrently on a thread pool; children come back in submission order."""
        remaining = self.remaining_choices
        if max_samples is None:
            if remaining is None:
                raise CheckpointError("parallel_step_sampler needs max_samples at a branchpoint")
            max_samples = remaining
        if remaining is not None:
            max_samples = min(max_samples, remaining)
        if max_samples <= 0:
            return []
        if max_workers < 1:
            raise CheckpointError(f"max_workers must be at least 1, got {max_workers}")
        chunk_size = chunk_size or max_samples
        shared = ProtectionBudget(max_protection) if max_protection is not None else None

        children: List[Checkpoint] = []
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for start in range(0, max_samples, chunk_size):
                count = min(chunk_size, max_samples - start)
                futures = []
                for _ in range(count):
                    step_budget = shared if shared is not None else ProtectionBudget(self._site_budget())
                    choice = self._take_choice() if self.is_choose else None
                    futures.append(pool.submit(self._step, None, flush_scores, step_budget, choice))
                exhausted = False
                for future in futures:
                    try:
                        child = future.result()
                    except ProtectExhausted as e:
                        logger.warning(f"⚠️ Parallel sampler dropped a sample: {e}")
                        exhausted = True
                        continue
                    if child.status != Status.DONE_STEPPING:
                        children.append(child)
                if exhausted:
                    break
        return children

    # ----------------------------
    # Accessors
    # ----------------------------

    @property
    def site(self) -> Optional[int]:
        return None if self.suspension is None else self.suspension.site

    @property
    def site_name(self) -> Optional[str]:
        return self.runtime.site_name(self.site)

    @property
    def is_choose(self) -> bool:
        return self.suspension is not None and self.suspension.choose

    def _choices(self) -> List[Any]:
        return self.frame.tmp_vars.get(choices_slot(self.suspension.slot), [])

    @property
    def remaining_choices(self) -> Optional[int]:
        """Choices left to hand out at a choose site; None at a plain branchpoint."""
        if not self.is_choose:
            return None
        if self.info.done_stepping:
            return 0
        with self._choice_lock:
            return max(0, len(self._choices()) - self._next_choice)

    @property
    def score_handle(self) -> Optional[ScoreHandle]:
        return self.info.score_handle

    @property
    def score(self) -> Optional[float]:
        """Most recent recorded score; None while unscored or pending group evaluation."""
        return self.info.score

    @property
    def has_return_value(self) -> bool:
        if self.status == Status.RETURNED:
            return True
        if self.status == Status.RUNNING:
            return self.info.optional_rv is not NO_VALUE
        return False

    @property
    def return_value(self) -> Any:
        if self.status == Status.RETURNED:
            return self._return_value
        if self.status == Status.RUNNING and self.info.optional_rv is not NO_VALUE:
            return self.info.optional_rv
        raise CheckpointError(f"checkpoint with status {self.status.value} has no return value")

    @property
    def killed_value(self) -> Any:
        return None if self._return_value is NO_VALUE else self._return_value

    @property
    def early_stopped_search(self) -> bool:
        return self.runtime.session.early_stop

    @property
    def branchpoint_params(self) -> Dict[str, Any]:
        return {} if self.suspension is None else dict(self.suspension.params)

    def get_branchpoint_param(self, name: str, default: Any = None) -> Any:
        if self.suspension is None:
            return default
        return self.suspension.params.get(name, default)

    @property
    def message_from_agent(self) -> Any:
        return self.get_branchpoint_param("message_to_controller")

    def __repr__(self) -> str:
        site = f" site={self.site}" if self.site is not None else ""
        return f"Checkpoint({self.status.value}{site}, score={self.score}, depth={self.depth})"


def start(
    space: CompiledSearchSpace,
    args: Optional[Dict[str, Any]] = None,
    session: Optional[SessionState] = None,
    max_protection: Optional[int] = None,
    observer: Optional[Observer] = None,
) -> Checkpoint:
    return Checkpoint.start(space, args, session, max_protection, observer)
