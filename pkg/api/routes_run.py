# api/routes_run.py
import logging

from fastapi import APIRouter

from api.errors import to_http_error
from services.controller import PanController, RunManifest

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/run")
def run_program(manifest: RunManifest):
    """
    Run a program with every branchpoint stepped once and return its value
    """
    try:
        outcome = PanController().run(manifest)
    except Exception as e:
        logger.warning(f"⚠️ Run failed: {e}")
        raise to_http_error(e)
    return {
        "value": outcome.to_json(),
        "score": outcome.score,
        "steps": outcome.steps,
        "costs": outcome.costs,
        "effects": outcome.effects,
    }
