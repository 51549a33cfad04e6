# tests/support.py
"""Helpers shared by the test modules."""
from pathlib import Path
from typing import Any, Dict, Optional

from compiler.cps import CompiledSearchSpace, compile_program
from lang import load_program
from runtime.provider import EffectProvider, ProviderScript
from runtime.session import SessionState
from services.checkpoint import Checkpoint, Status
from services.trace import SearchTreeTrace

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
PROVIDERS = CORPUS / "providers"


def compile_source(text: str, entry: str = "main") -> CompiledSearchSpace:
    program, _ = load_program(text)
    return compile_program(program, entry)


def make_session(script: Optional[ProviderScript] = None, seed: int = 0) -> SessionState:
    return SessionState(seed=seed, provider=EffectProvider(script, seed), tracer=SearchTreeTrace())


def start(
    text: str,
    args: Optional[Dict[str, Any]] = None,
    script: Optional[ProviderScript] = None,
    seed: int = 0,
    entry: str = "main",
) -> Checkpoint:
    return Checkpoint.start(compile_source(text, entry), args or {}, make_session(script, seed))


def run_to_end(cp: Checkpoint) -> Checkpoint:
    """Step every branchpoint once, like `pan run`."""
    while cp.status == Status.RUNNING:
        cp = cp.step()
    return cp


def corpus_source(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


def corpus_provider(name: str) -> ProviderScript:
    return ProviderScript.load(PROVIDERS / name)
