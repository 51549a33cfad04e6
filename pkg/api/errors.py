# api/errors.py
from fastapi import HTTPException
from pydantic import ValidationError

from compiler.cps import CompileError
from lang.diagnostics import LexError, ParseError, PanError, ProgramInvalid
from runtime.errors import CheckpointError, FinishedStepping, PanRuntimeError, ProtectExhausted
from services.search_engine import NoSurvivingBranch, SearchError


def error_payload(e: Exception) -> dict:
    """The `{"error", "message"}` object the CLI prints and the API returns."""
    if isinstance(e, (PanRuntimeError, ProtectExhausted)):
        return e.to_json()
    if isinstance(e, ProgramInvalid):
        return {
            "error": "ProgramInvalid",
            "message": str(e),
            "diagnostics": [
                {"severity": d.severity, "message": d.message, "span": str(d.span)} for d in e.diagnostics
            ],
        }
    return {"error": type(e).__name__, "message": str(e)}


def is_program_error(e: Exception) -> bool:
    """Failures of the PanScript program itself, as opposed to bad input."""
    return isinstance(e, (PanRuntimeError, FinishedStepping, ProtectExhausted, NoSurvivingBranch))


def to_http_error(e: Exception) -> HTTPException:
    if is_program_error(e):
        return HTTPException(status_code=422, detail=error_payload(e))
    if isinstance(
        e, (ProgramInvalid, LexError, ParseError, CompileError, CheckpointError, SearchError, ValidationError, ValueError,
            OSError, PanError)
    ):
        return HTTPException(status_code=400, detail=error_payload(e))
    return HTTPException(status_code=500, detail={"error": type(e).__name__, "message": str(e)})
