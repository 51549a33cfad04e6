# services/algorithms.py
"""Built-in search algorithms over the checkpoint interface."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from services.checkpoint import Checkpoint, Status
from services.search_engine import (
    ResultPair,
    SearchConfigError,
    SearchContext,
    check_count,
    check_number,
    harvest,
    search_algo,
)

logger = logging.getLogger(__name__)

PARALLEL_WORKERS = 4

_TRAVERSAL_PARAMS = ["default_branching"]
_BEAM_PARAMS = ["beam_width", "default_branching", "root_branching", "shuffle_ties"]
_BEST_FIRST_PARAMS = ["top_k_popped", "default_branching", "max_num_results", "max_expansions"]
_RESAMPLING_PARAMS = ["top_k_popped", "default_branching", "max_num_results", "max_expansions"]
_MCTS_PARAMS = ["num_iterations", "value_fn", "exploration_c", "default_branching"]


def _rank_key(cp: Checkpoint):
    # unscored sorts after every real score
    score = cp.score
    return (1, 0.0) if score is None else (0, -score)


# ----------------------------
# Traversals
# ----------------------------

@search_algo("parallel_dfs", _TRAVERSAL_PARAMS, default_parallelism=PARALLEL_WORKERS)
@search_algo("dfs", _TRAVERSAL_PARAMS)
def dfs(default_branching: Optional[int] = None):
    check_count("default_branching", default_branching, allow_none=True)

    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        stack = [root]
        while stack:
            cp = stack.pop()
            yield from harvest(cp)
            if cp.status == Status.RUNNING and not ctx.stopped:
                stack.extend(reversed(ctx.expand(cp, ctx.branching(cp, default_branching))))

    return body


@search_algo("parallel_bfs", _TRAVERSAL_PARAMS, default_parallelism=PARALLEL_WORKERS)
@search_algo("bfs", _TRAVERSAL_PARAMS)
def bfs(default_branching: Optional[int] = None):
    check_count("default_branching", default_branching, allow_none=True)

    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        queue = deque([root])
        while queue:
            cp = queue.popleft()
            yield from harvest(cp)
            if cp.status == Status.RUNNING and not ctx.stopped:
                queue.extend(ctx.expand(cp, ctx.branching(cp, default_branching)))

    return body


def _rollout(root: Checkpoint, ctx: SearchContext) -> List[ResultPair]:
    found: List[ResultPair] = []
    cp = root
    while cp.status == Status.RUNNING and not ctx.stopped:
        children = ctx.expand(cp, 1)
        if not children:
            break
        cp = children[0]
        found.extend(harvest(cp))
    return found


@search_algo("parallel_sampling", ["num_rollouts"], default_parallelism=PARALLEL_WORKERS)
@search_algo("sampling", ["num_rollouts"])
def sampling(num_rollouts: int = 1):
    """Independent root-to-leaf rollouts with branching 1 (global best-of-N)."""
    check_count("num_rollouts", num_rollouts)

    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        yield from harvest(root)
        if root.status != Status.RUNNING:
            return
        if ctx.max_parallelism > 1:
            serial = SearchContext(ctx.session, 1)
            with ThreadPoolExecutor(max_workers=ctx.max_parallelism) as pool:
                futures = [pool.submit(_rollout, root, serial) for _ in range(num_rollouts)]
                for future in futures:
                    yield from future.result()
            return
        for _ in range(num_rollouts):
            if ctx.stopped:
                break
            yield from _rollout(root, ctx)

    return body


# ----------------------------
# Beam search
# ----------------------------

def _round_robin(groups: List[List[Checkpoint]]) -> List[Checkpoint]:
    out: List[Checkpoint] = []
    for row in itertools.zip_longest(*groups):
        out.extend(cp for cp in row if cp is not None)
    return out


@search_algo("parallel_beam", _BEAM_PARAMS, default_parallelism=PARALLEL_WORKERS)
@search_algo("beam", _BEAM_PARAMS)
def beam(
    beam_width: int = 1,
    default_branching: Optional[int] = 1,
    root_branching: Optional[int] = None,
    shuffle_ties: bool = False,
):
    check_count("beam_width", beam_width)
    check_count("default_branching", default_branching, allow_none=True)
    check_count("root_branching", root_branching, allow_none=True)

    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        yield from harvest(root)
        frontier = [root] if root.status == Status.RUNNING else []
        while frontier and not ctx.stopped:
            groups = []
            for cp in frontier:
                if ctx.stopped:
                    break
                if cp is root and root_branching is not None:
                    n = root_branching
                else:
                    n = ctx.branching(cp, default_branching)
                groups.append(ctx.expand(cp, n))
            survivors: List[Checkpoint] = []
            for child in _round_robin(groups):
                yield from harvest(child)
                if child.status == Status.RUNNING:
                    survivors.append(child)
            if shuffle_ties:
                survivors = [survivors[i] for i in ctx.rng.permutation(len(survivors))]
            survivors.sort(key=_rank_key)
            frontier = survivors[:beam_width]
            logger.debug(f"🔄 Beam level kept {len(frontier)} of {len(survivors)} states")

    return body


# ----------------------------
# Best-first family
# ----------------------------

@search_algo("best_first", _BEST_FIRST_PARAMS)
def best_first(
    top_k_popped: int = 1,
    default_branching: Optional[int] = 1,
    max_num_results: Optional[int] = None,
    max_expansions: Optional[int] = None,
):
    """Classic best-first: pop the best states, expand each fully once."""
    check_count("top_k_popped", top_k_popped)
    check_count("default_branching", default_branching, allow_none=True)
    check_count("max_num_results", max_num_results, allow_none=True)
    check_count("max_expansions", max_expansions, minimum=0, allow_none=True)

    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        counter = itertools.count()
        heap: list = []

        def push(cp: Checkpoint) -> None:
            heapq.heappush(heap, (_rank_key(cp), next(counter), cp))

        push(root)
        results = 0
        expansions = 0
        while heap:
            popped = [heapq.heappop(heap)[2] for _ in range(min(top_k_popped, len(heap)))]
            for cp in popped:
                for pair in harvest(cp):
                    yield pair
                    results += 1
                    if max_num_results is not None and results >= max_num_results:
                        return
                if cp.status != Status.RUNNING or ctx.stopped:
                    continue
                if max_expansions is not None and expansions >= max_expansions:
                    continue
                expansions += 1
                for child in ctx.expand(cp, ctx.branching(cp, default_branching)):
                    push(child)

    return body


class _FrontierEntry:
    __slots__ = ("cp", "expansions")

    def __init__(self, cp: Checkpoint):
        self.cp = cp
        self.expansions = 0


def exploration_bonus(c: float, total: int, node_expansions: int) -> float:
    return c * math.sqrt(math.log(max(total, 1)) / (1 + node_expansions))


def _resampling_best_first(
    exploration_c: float, max_num_results: Optional[int], max_expansions: int, top_k_popped: int
):
    def body(root: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        results = 0
        for pair in harvest(root):
            yield pair
            results += 1
        frontier: List[_FrontierEntry] = [_FrontierEntry(root)] if root.status == Status.RUNNING else []
        total = 0
        while frontier and not ctx.stopped and total < max_expansions:
            values = np.array(
                [
                    -np.inf if e.cp.score is None else e.cp.score + exploration_bonus(exploration_c, total, e.expansions)
                    for e in frontier
                ]
            )
            popped = [frontier[int(i)] for i in np.argsort(-values, kind="stable")[:top_k_popped]]
            for entry in popped:
                if max_num_results is not None and results >= max_num_results:
                    return
                if ctx.stopped or total >= max_expansions:
                    break
                # the popped state stays in the frontier and can be expanded again
                children = ctx.expand(entry.cp, 1)
                total += 1
                entry.expansions += 1
                if not children or entry.cp.remaining_choices == 0:
                    frontier.remove(entry)
                for child in children:
                    for pair in harvest(child):
                        yield pair
                        results += 1
                    if child.status == Status.RUNNING:
                        frontier.append(_FrontierEntry(child))

    return body


def _one_child_per_pop(default_branching: Optional[int]) -> None:
    if default_branching is not None and default_branching != 1:
        raise SearchConfigError(
            f"re-expanding best-first samples one child per pop; default_branching must be 1, got {default_branching}"
        )


@search_algo("best_first_reexpand", _RESAMPLING_PARAMS)
def reexpand(
    max_num_results: Optional[int] = None,
    max_expansions: int = 100,
    top_k_popped: int = 1,
    default_branching: Optional[int] = 1,
):
    """Best-first that samples one child per pop and keeps the popped state."""
    check_count("max_num_results", max_num_results, allow_none=True)
    check_count("max_expansions", max_expansions, minimum=0)
    check_count("top_k_popped", top_k_popped)
    _one_child_per_pop(default_branching)
    return _resampling_best_first(0.0, max_num_results, max_expansions, top_k_popped)


@search_algo("best_first_explorative", _RESAMPLING_PARAMS + ["exploration_c"])
def explorative(
    max_num_results: Optional[int] = None,
    max_expansions: int = 100,
    exploration_c: float = 1.0,
    top_k_popped: int = 1,
    default_branching: Optional[int] = 1,
):
    """Re-expanding best-first with an upper-confidence bonus for rarely expanded states."""
    check_count("max_num_results", max_num_results, allow_none=True)
    check_count("max_expansions", max_expansions, minimum=0)
    check_count("top_k_popped", top_k_popped)
    _one_child_per_pop(default_branching)
    c = check_number("exploration_c", exploration_c)
    return _resampling_best_first(c, max_num_results, max_expansions, top_k_popped)


# ----------------------------
# MCTS
# ----------------------------

ValueFn = Callable[[Checkpoint], float]
_VALUE_FNS: Dict[str, ValueFn] = {}


def register_value_fn(name: str, fn: ValueFn) -> None:
    if name in _VALUE_FNS:
        raise SearchConfigError(f"value function {name} is already registered")
    _VALUE_FNS[name] = fn


def _score_value(cp: Checkpoint) -> float:
    return 0.0 if cp.score is None else float(cp.score)


def _returned_score_value(cp: Checkpoint) -> float:
    if cp.status != Status.RETURNED or cp.score is None:
        return 0.0
    return float(cp.score)


register_value_fn("score", _score_value)
register_value_fn("returned_score", _returned_score_value)


class MctsNode:
    __slots__ = ("cp", "parent", "children", "visits", "value_sum", "limit")

    def __init__(self, cp: Checkpoint, parent: Optional["MctsNode"], limit: int):
        self.cp = cp
        self.parent = parent
        self.children: List[MctsNode] = []
        self.visits = 0
        self.value_sum = 0.0
        self.limit = limit

    @property
    def mean(self) -> float:
        return self.value_sum / self.visits if self.visits else 0.0

    @property
    def expandable(self) -> bool:
        return self.cp.status == Status.RUNNING and len(self.children) < self.limit

    def select_child(self, c: float) -> "MctsNode":
        log_n = math.log(max(self.visits, 1))
        uct = np.array(
            [
                np.inf if child.visits == 0 else child.mean + c * math.sqrt(log_n / child.visits)
                for child in self.children
            ]
        )
        return self.children[int(np.argmax(uct))]


@search_algo("mcts", _MCTS_PARAMS)
def mcts(
    num_iterations: int = 10,
    value_fn: str = "score",
    exploration_c: float = 1.414,
    default_branching: int = 2,
):
    check_count("num_iterations", num_iterations)
    check_count("default_branching", default_branching)
    c = check_number("exploration_c", exploration_c)
    if value_fn not in _VALUE_FNS:
        raise SearchConfigError(f"unknown value function {value_fn}; known: {', '.join(sorted(_VALUE_FNS))}")
    evaluate = _VALUE_FNS[value_fn]

    def body(root_cp: Checkpoint, ctx: SearchContext) -> Iterator[ResultPair]:
        yield from harvest(root_cp)

        def node_for(cp: Checkpoint, parent: Optional[MctsNode]) -> MctsNode:
            if cp.status != Status.RUNNING:
                limit = 0
            elif cp.is_choose and "branching" not in cp.branchpoint_params:
                limit = cp.remaining_choices
            else:
                limit = ctx.branching(cp, default_branching)
            return MctsNode(cp, parent, limit)

        root = node_for(root_cp, None)
        for _ in range(num_iterations):
            if ctx.stopped:
                break
            node = root
            while not node.expandable and node.children:
                node = node.select_child(c)
            if node.expandable:
                children = ctx.expand(node.cp, 1)
                if children:
                    child = node_for(children[0], node)
                    node.children.append(child)
                    node = child
                    yield from harvest(child.cp)
                else:
                    node.limit = len(node.children)
            value = evaluate(node.cp)
            while node is not None:
                node.visits += 1
                node.value_sum += value
                node = node.parent
        logger.debug(f"🔄 MCTS root visits {root.visits}, children {[n.visits for n in root.children]}")

    return body
