# lang/__init__.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Tuple, Union

from lang.ast_nodes import SourceProgram
from lang.diagnostics import Diagnostic, ProgramInvalid
from lang.parser import parse_source
from lang.validator import validate

logger = logging.getLogger(__name__)


def load_program(text: str, path: str = "<source>") -> Tuple[SourceProgram, List[Diagnostic]]:
    """Parse and validate; raises ProgramInvalid when any error diagnostic is found.

    Warnings are returned alongside the program.
    """
    program = parse_source(text, path)
    diagnostics = validate(program)
    if any(d.is_error for d in diagnostics):
        raise ProgramInvalid(diagnostics, path)
    for d in diagnostics:
        logger.warning(f"⚠️ {d.render(path)}")
    return program, diagnostics


def load_file(path: Union[str, Path]) -> Tuple[SourceProgram, List[Diagnostic]]:
    path = Path(path)
    # utf-8-sig drops a leading byte-order mark; CRLF is handled by the scanner
    text = path.read_text(encoding="utf-8-sig")
    return load_program(text, str(path))
