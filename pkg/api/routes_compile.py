# api/routes_compile.py
import logging

from typing import Optional

from fastapi import APIRouter
from pydantic import BaseModel

from api.errors import to_http_error
from services.controller import PanController, RunManifest

logger = logging.getLogger(__name__)

router = APIRouter()


class CompileRequest(BaseModel):
    source: str
    entry: Optional[str] = None
    emit: str = "cps"


@router.post("/compile")
def compile_program(request: CompileRequest):
    """
    Pretty-print the program's AST, normalized form or CPS body graph
    """
    try:
        manifest = RunManifest(source=request.source, entry=request.entry)
        text = PanController().emit(manifest, request.emit)
    except Exception as e:
        logger.warning(f"⚠️ Compile failed: {e}")
        raise to_http_error(e)
    return {"emit": request.emit, "text": text}
