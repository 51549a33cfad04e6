# services/trace.py
from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

from pydantic import BaseModel, Field

from runtime.scoredb import ScoreHandle

logger = logging.getLogger(__name__)


class TraceNode(BaseModel):
    id: int
    parent: Optional[int] = None
    site: Optional[int] = None
    site_name: Optional[str] = None
    status: str
    score: Optional[float] = None
    costs: Dict[str, float] = Field(default_factory=dict)
    order: int
    depth: int = 0
    after_early_stop: bool = False


class _Record(NamedTuple):
    parent: Optional[int]
    site: Optional[int]
    site_name: Optional[str]
    status: str
    handle: Optional[ScoreHandle]
    costs: Dict[str, float]
    depth: int
    after_early_stop: bool


class SearchTreeTrace:
    """Every checkpoint created during a session, as a tree rooted at node 0.

    Steps only append a record; TraceNode models are built when the trace is read,
    with group scores taken from their handles at that moment.
    """

    def __init__(self):
        self._records: List[_Record] = []
        self._lock = threading.Lock()

    def record(
        self,
        parent: Optional[int],
        site: Optional[int],
        site_name: Optional[str],
        status: str,
        handle: Optional[ScoreHandle],
        costs: Dict[str, float],
        depth: int,
        after_early_stop: bool = False,
    ) -> int:
        with self._lock:
            node_id = len(self._records)
            if parent is not None and not 0 <= parent < node_id:
                raise ValueError(f"trace parent {parent} does not reference an earlier node")
            self._records.append(
                _Record(parent, site, site_name, status, handle, dict(costs) if costs else {}, depth, after_early_stop)
            )
            return node_id

    def __len__(self) -> int:
        return len(self._records)

    @property
    def nodes(self) -> List[TraceNode]:
        with self._lock:
            records = list(self._records)
        return [
            TraceNode(
                id=node_id,
                parent=r.parent,
                site=r.site,
                site_name=r.site_name,
                status=r.status,
                score=None if r.handle is None else r.handle.value,
                costs=r.costs,
                order=node_id,
                depth=r.depth,
                after_early_stop=r.after_early_stop,
            )
            for node_id, r in enumerate(records)
        ]

    def to_json(self) -> List[Dict[str, Any]]:
        return [node.model_dump() for node in self.nodes]

    def to_dot(self) -> str:
        nodes = self.nodes
        lines = ["digraph search_tree {", "  node [shape=box, fontname=monospace];"]
        for node in nodes:
            name = node.site_name or (f"site {node.site}" if node.site is not None else "terminal")
            score = "unscored" if node.score is None else f"{node.score:g}"
            label = f"#{node.id} {name}\\n{node.status} {score}"
            lines.append(f'  n{node.id} [label="{label}"];')
        for node in nodes:
            if node.parent is not None:
                lines.append(f"  n{node.parent} -> n{node.id};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def write_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"✅ Wrote trace with {len(self)} nodes to {path}")

    def write_dot(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_dot(), encoding="utf-8")
        logger.info(f"✅ Wrote DOT trace to {path}")
