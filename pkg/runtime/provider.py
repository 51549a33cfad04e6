# runtime/provider.py
"""Deterministic effect provider standing in for stochastic external calls.

A provider script maps op names to either a scripted response list
(replayed in call order, shared by all branches) or a seeded candidate
list (drawn from a generator keyed by seed, op, call site and invocation
index). Ops can also be told to fail their first n invocations.
"""
from __future__ import annotations

import logging
import threading
import zlib
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from runtime.errors import PanRuntimeError
from runtime.values import from_json, to_json

logger = logging.getLogger(__name__)


class OpScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["scripted", "seeded"] = "scripted"
    responses: List[Any] = Field(default_factory=list)
    candidates: List[Any] = Field(default_factory=list)

    @model_validator(mode="after")
    def _seeded_needs_candidates(self) -> "OpScript":
        if self.mode == "seeded" and not self.candidates:
            raise ValueError("seeded ops need a non-empty candidates list")
        return self


class ErrorScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fail_first_n: int = Field(0, ge=0)
    tag: str = "ProviderError"


class ProviderScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ops: Dict[str, OpScript] = Field(default_factory=dict)
    errors: Dict[str, ErrorScript] = Field(default_factory=dict)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ProviderScript":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def scripted(cls, **responses: List[Any]) -> "ProviderScript":
        """Shorthand used by tests: op names with dots written as double underscores."""
        return cls(ops={op.replace("__", "."): OpScript(responses=list(r)) for op, r in responses.items()})


@dataclass
class EffectCall:
    order: int
    op: str
    args: List[Any]
    kwargs: Dict[str, Any]
    site: int
    invocation: int
    result: Any = None
    error: Optional[str] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "op": self.op,
            "args": self.args,
            "kwargs": self.kwargs,
            "site": self.site,
            "invocation": self.invocation,
            "result": self.result,
            "error": self.error,
        }


class EffectProvider:
    def __init__(self, script: Optional[ProviderScript] = None, seed: int = 0):
        self.script = script or ProviderScript()
        self.seed = seed
        self.log: List[EffectCall] = []
        self._cursors: Dict[str, int] = defaultdict(int)
        self._calls: Dict[str, int] = defaultdict(int)
        self._invocations: Dict[Tuple[str, int], int] = defaultdict(int)
        self._lock = threading.Lock()

    def perform(self, op: str, args: List[Any], kwargs: Dict[str, Any], site: int) -> Any:
        with self._lock:
            call_number = self._calls[op]
            self._calls[op] += 1
            invocation = self._invocations[(op, site)]
            self._invocations[(op, site)] += 1
            entry = EffectCall(len(self.log), op, to_json(args), to_json(kwargs), site, invocation)
            self.log.append(entry)

            failure = self.script.errors.get(op)
            if failure is not None and call_number < failure.fail_first_n:
                entry.error = failure.tag
                logger.debug(f"⚠️ {op} scripted failure {call_number + 1}/{failure.fail_first_n}")
                raise PanRuntimeError(failure.tag, f"{op} failed ({call_number + 1} of {failure.fail_first_n})")

            spec = self.script.ops.get(op)
            if spec is None:
                if failure is not None:
                    return None
                entry.error = "ProviderExhausted"
                raise PanRuntimeError("ProviderExhausted", f"no provider script for op {op}")

            if spec.mode == "seeded":
                result = spec.candidates[self._draw(op, site, invocation, len(spec.candidates))]
            else:
                cursor = self._cursors[op]
                if cursor >= len(spec.responses):
                    entry.error = "ProviderExhausted"
                    raise PanRuntimeError(
                        "ProviderExhausted", f"op {op} has no responses left after {len(spec.responses)} calls"
                    )
                self._cursors[op] = cursor + 1
                result = spec.responses[cursor]
            entry.result = result
            return from_json(result)

    def _draw(self, op: str, site: int, invocation: int, n: int) -> int:
        rng = np.random.default_rng([self.seed, zlib.crc32(op.encode("utf-8")), site, invocation])
        return int(rng.integers(n))

    def transcript(self) -> List[Dict[str, Any]]:
        with self._lock:
            return [call.to_json() for call in self.log]

    def calls_for(self, op: str) -> List[EffectCall]:
        with self._lock:
            return [c for c in self.log if c.op == op]
