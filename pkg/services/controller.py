# services/controller.py
import json
import logging
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from api.config import Settings, get_settings
from compiler.cps import CompiledSearchSpace, compile_program
from compiler.emit import EMIT_MODES, emit
from lang import load_file, load_program
from lang.ast_nodes import SourceProgram
from lang.diagnostics import Diagnostic
from runtime.errors import FinishedStepping, PanRuntimeError
from runtime.provider import EffectProvider, ProviderScript
from runtime.session import SessionState
from runtime.values import display, from_json, to_json
from services.checkpoint import Checkpoint, Status
from services.search_engine import SearchConfig, SearchResult, run_search
from services.trace import SearchTreeTrace

logger = logging.getLogger(__name__)


class RunManifest(BaseModel):
    """Everything one run, search or compile invocation needs."""

    model_config = ConfigDict(extra="forbid")

    program_path: Optional[str] = None
    source: Optional[str] = None
    entry: Optional[str] = None
    args: Dict[str, Any] = Field(default_factory=dict)
    provider_path: Optional[str] = None
    provider: Optional[ProviderScript] = None
    seed: Optional[int] = None
    search: Optional[SearchConfig] = None
    trace_path: Optional[str] = None
    trace_dot_path: Optional[str] = None

    @model_validator(mode="after")
    def _one_program(self) -> "RunManifest":
        if (self.program_path is None) == (self.source is None):
            raise ValueError("give exactly one of program_path or source")
        if self.provider_path is not None and self.provider is not None:
            raise ValueError("give at most one of provider_path or provider")
        return self


class RunOutcome(BaseModel):
    value: Any = None
    score: Optional[float] = None
    steps: int = 0
    costs: Dict[str, float] = Field(default_factory=dict)
    effects: List[Dict[str, Any]] = Field(default_factory=list)

    def to_json(self) -> Any:
        return to_json(self.value)


def parse_json_args(text: Optional[str]) -> Dict[str, Any]:
    """Decode a JSON object of entry arguments; ints and floats stay distinct."""
    if not text:
        return {}
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("--args must be a JSON object mapping parameter names to values")
    return from_json(data)


class PanController:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    # ----------------------------
    # Loading
    # ----------------------------

    def load(self, manifest: RunManifest) -> Tuple[SourceProgram, List[Diagnostic]]:
        if manifest.program_path is not None:
            logger.info(f"🔄 Loading {manifest.program_path}")
            return load_file(manifest.program_path)
        return load_program(manifest.source, "<request>")

    @staticmethod
    def resolve_entry(program: SourceProgram, entry: Optional[str]) -> str:
        if entry is not None:
            return entry
        if program.function("main") is not None:
            return "main"
        if not program.function_defs:
            raise ValueError("program defines no functions")
        return program.function_defs[0].name

    def compile(self, manifest: RunManifest) -> Tuple[SourceProgram, CompiledSearchSpace]:
        program, _ = self.load(manifest)
        space = compile_program(program, self.resolve_entry(program, manifest.entry))
        return program, space

    def emit(self, manifest: RunManifest, mode: str) -> str:
        if mode not in EMIT_MODES:
            raise ValueError(f"unknown emit mode {mode}; expected one of {', '.join(EMIT_MODES)}")
        if mode == "ast":
            program, _ = self.load(manifest)
            return emit(program, mode)
        program, space = self.compile(manifest)
        return emit(program, mode, space)

    def session(self, manifest: RunManifest) -> SessionState:
        seed = manifest.seed if manifest.seed is not None else self.settings.default_seed
        if manifest.provider is not None:
            script = manifest.provider
        elif manifest.provider_path is not None:
            script = ProviderScript.load(manifest.provider_path)
        else:
            script = ProviderScript()
        return SessionState(seed=seed, provider=EffectProvider(script, seed), tracer=SearchTreeTrace())

    # ----------------------------
    # Commands
    # ----------------------------

    def run(self, manifest: RunManifest) -> RunOutcome:
        """Step every branchpoint exactly once and return the program's value."""
        _, space = self.compile(manifest)
        session = self.session(manifest)
        cp = Checkpoint.start(space, manifest.args, session)
        while cp.status == Status.RUNNING:
            cp = cp.step()
        if cp.status == Status.KILLED:
            if cp.error is not None:
                raise cp.error
            raise PanRuntimeError("KilledBranch", f"branch killed with {display(cp.killed_value)}")
        if cp.status == Status.DONE_STEPPING:
            raise FinishedStepping(f"choose at site {cp.parent.site} had no choices left")
        self._write_traces(manifest, session.tracer)
        logger.info(f"✅ Run of '{space.entry}' finished after {session.step_calls} steps")
        return RunOutcome(
            value=cp.return_value,
            score=cp.score,
            steps=session.step_calls,
            costs=session.costs_snapshot(),
            effects=session.provider.transcript(),
        )

    def search(self, manifest: RunManifest) -> SearchResult:
        if manifest.search is None:
            raise ValueError("search needs a search config")
        manifest.search.resolve()
        _, space = self.compile(manifest)
        session = self.session(manifest)
        config = manifest.search
        if config.max_parallelism is None and self.settings.max_parallelism > 1:
            config = config.model_copy(update={"max_parallelism": self.settings.max_parallelism})
        result = run_search(space, manifest.args, config, session)
        self._write_traces(manifest, result.trace)
        return result

    @staticmethod
    def _write_traces(manifest: RunManifest, trace: SearchTreeTrace) -> None:
        if manifest.trace_path:
            trace.write_json(manifest.trace_path)
        if manifest.trace_dot_path:
            trace.write_dot(manifest.trace_dot_path)
