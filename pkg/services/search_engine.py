# services/search_engine.py
"""Search entry points, the algorithm registry and the context algorithms run in.

An algorithm is registered as a factory: it receives the search params as
keyword arguments and returns a body. The body receives the root
checkpoint and a SearchContext, and yields (return value, score handle)
pairs. Scores are read once the search is over, so group-evaluated
scores reflect every submission made during the search.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from compiler.cps import CompiledSearchSpace
from lang.diagnostics import PanError
from runtime.errors import ProtectExhausted
from runtime.scoredb import ScoreHandle
from runtime.session import SessionState
from runtime.values import to_json
from services.checkpoint import Checkpoint, Status
from services.trace import SearchTreeTrace

logger = logging.getLogger(__name__)


class SearchError(PanError):
    pass


class UnknownAlgo(SearchError):
    pass


class DuplicateAlgo(SearchError):
    pass


class SearchConfigError(SearchError):
    pass


class NoSurvivingBranch(SearchError):
    def __init__(self, message: str = "every branch was killed or produced no return value"):
        super().__init__(message)


ResultPair = Tuple[Any, Optional[ScoreHandle]]
AlgoBody = Callable[[Checkpoint, "SearchContext"], Iterable[ResultPair]]
AlgoFactory = Callable[..., AlgoBody]


@dataclass(frozen=True)
class AlgoSpec:
    name: str
    factory: AlgoFactory
    param_names: FrozenSet[str]
    default_parallelism: int = 1


_REGISTRY: Dict[str, AlgoSpec] = {}
_REGISTRY_LOCK = threading.Lock()


def register_algo(
    name: str, factory: AlgoFactory, param_names: Iterable[str] = (), default_parallelism: int = 1
) -> None:
    with _REGISTRY_LOCK:
        if name in _REGISTRY:
            raise DuplicateAlgo(f"search algorithm {name} is already registered")
        _REGISTRY[name] = AlgoSpec(name, factory, frozenset(param_names), default_parallelism)
    logger.debug(f"✅ Registered search algorithm '{name}'")


def search_algo(name: str, param_names: Iterable[str] = (), default_parallelism: int = 1):
    """Decorator form of register_algo."""

    def decorate(factory: AlgoFactory) -> AlgoFactory:
        register_algo(name, factory, param_names, default_parallelism)
        return factory

    return decorate


def unregister_algo(name: str) -> None:
    with _REGISTRY_LOCK:
        _REGISTRY.pop(name, None)


def get_algo(name: str) -> AlgoSpec:
    with _REGISTRY_LOCK:
        spec = _REGISTRY.get(name)
    if spec is None:
        raise UnknownAlgo(f"unknown search algorithm {name}; known: {', '.join(registered_algos())}")
    return spec


def registered_algos() -> List[str]:
    with _REGISTRY_LOCK:
        return sorted(_REGISTRY)


# accepted by every algorithm; consumed by run_search itself
COMMON_PARAMS = frozenset(["max_parallelism"])


class SearchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algo: str
    params: Dict[str, Any] = Field(default_factory=dict)
    max_parallelism: Optional[int] = Field(None, ge=1)

    def resolve(self) -> AlgoSpec:
        """Check the algorithm name and every param name before anything runs."""
        spec = get_algo(self.algo)
        unknown = sorted(set(self.params) - spec.param_names - COMMON_PARAMS)
        if unknown:
            allowed = ", ".join(sorted(spec.param_names)) or "none"
            raise SearchConfigError(f"unknown params for {self.algo}: {', '.join(unknown)} (allowed: {allowed})")
        return spec


def check_count(name: str, value: Any, minimum: int = 1, allow_none: bool = False) -> Optional[int]:
    if value is None and allow_none:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise SearchConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def check_number(name: str, value: Any, minimum: float = 0.0) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < minimum:
        raise SearchConfigError(f"{name} must be a number >= {minimum}, got {value!r}")
    return float(value)


class SearchContext:
    """What an algorithm body may use besides the checkpoints themselves."""

    def __init__(self, session: SessionState, max_parallelism: int = 1):
        self.session = session
        self.max_parallelism = max_parallelism

    @property
    def stopped(self) -> bool:
        return self.session.early_stop

    @property
    def rng(self):
        return self.session.rng

    def branching(self, cp: Checkpoint, default: Optional[int]) -> int:
        """Children to sample at `cp`: the site's own `branching` param wins over the default."""
        value = cp.get_branchpoint_param("branching", default)
        if value is None:
            if cp.is_choose:
                return cp.remaining_choices
            raise SearchConfigError(f"branchpoint {cp.site_name or cp.site} needs a branching factor")
        return check_count("branching", value)

    def expand(self, cp: Checkpoint, n: int) -> List[Checkpoint]:
        """Sample up to n children of `cp`, never starting a step once early stop is set."""
        if cp.status != Status.RUNNING:
            return []
        workers = cp.get_branchpoint_param("max_workers", self.max_parallelism)
        workers = check_count("max_workers", workers)
        if workers > 1:
            return self._expand_parallel(cp, n, workers)
        children: List[Checkpoint] = []
        for _ in range(n):
            if self.stopped or cp.remaining_choices == 0:
                break
            try:
                child = cp.step()
            except ProtectExhausted as e:
                logger.warning(f"⚠️ Stopped expanding node {cp.node_id}: {e}")
                break
            if child.status == Status.DONE_STEPPING:
                break
            children.append(child)
        return children

    def _expand_parallel(self, cp: Checkpoint, n: int, workers: int) -> List[Checkpoint]:
        children: List[Checkpoint] = []
        requested = 0
        while requested < n and not self.stopped and cp.remaining_choices != 0:
            batch = min(workers, n - requested)
            requested += batch
            children.extend(cp.parallel_step_sampler(batch, max_workers=workers))
        return children


@dataclass
class SearchResult:
    best: Tuple[Any, Optional[float]]
    all: List[Tuple[Any, Optional[float]]]
    trace: SearchTreeTrace
    aggregate_costs: Dict[str, float] = field(default_factory=dict)

    @staticmethod
    def _pair_json(pair: Tuple[Any, Optional[float]]) -> Dict[str, Any]:
        return {"value": to_json(pair[0]), "score": pair[1]}

    def to_json(self, include_all: bool = False) -> Any:
        if include_all:
            return [self._pair_json(p) for p in self.all]
        return self._pair_json(self.best)


def pick_best(results: List[Tuple[Any, Optional[float]]]) -> Tuple[Any, Optional[float]]:
    """Highest score wins; unscored ranks below everything; ties go to the earliest result."""
    best = results[0]
    for pair in results[1:]:
        if pair[1] is not None and (best[1] is None or pair[1] > best[1]):
            best = pair
    return best


def run_search(
    space: CompiledSearchSpace,
    args: Optional[Dict[str, Any]],
    config: SearchConfig,
    session: Optional[SessionState] = None,
) -> SearchResult:
    spec = config.resolve()
    session = session if session is not None else SessionState()
    if session.tracer is None:
        session.tracer = SearchTreeTrace()
    params = dict(config.params)
    parallelism = check_count(
        "max_parallelism", params.pop("max_parallelism", None) or config.max_parallelism or spec.default_parallelism
    )
    body = spec.factory(**params)
    logger.info(f"🔄 Running {spec.name} search on '{space.entry}' (parallelism {parallelism})")

    root = Checkpoint.start(space, args, session)
    context = SearchContext(session, parallelism)
    pairs = list(body(root, context))
    results = [(value, None if handle is None else handle.value) for value, handle in pairs]
    if not results:
        raise NoSurvivingBranch()
    best = pick_best(results)
    costs = session.costs_snapshot()
    logger.info(f"✅ {spec.name} search found {len(results)} results, best score {best[1]}, costs {costs}")
    return SearchResult(best=best, all=results, trace=session.tracer, aggregate_costs=costs)


def search(space: CompiledSearchSpace, args: Optional[Dict[str, Any]], algo: str, **params: Any) -> Tuple[Any, Optional[float]]:
    return run_search(space, args, SearchConfig(algo=algo, params=params)).best


def search_multiple(
    space: CompiledSearchSpace, args: Optional[Dict[str, Any]], algo: str, **params: Any
) -> List[Tuple[Any, Optional[float]]]:
    return run_search(space, args, SearchConfig(algo=algo, params=params)).all


def harvest(cp: Checkpoint) -> Iterator[ResultPair]:
    """The result a checkpoint contributes, if any (returned value or optional return)."""
    if cp.has_return_value:
        yield cp.return_value, cp.score_handle


# built-in algorithms register themselves on import
from services import algorithms  # noqa: E402,F401
