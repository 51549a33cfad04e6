# api/routes_search.py
import logging

from fastapi import APIRouter, HTTPException

from api.errors import to_http_error
from services.controller import PanController, RunManifest
from services.search_engine import registered_algos

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/search")
def search_program(manifest: RunManifest, all: bool = False, include_trace: bool = False):
    """
    Search the program's execution tree and return the best result (or all of them)
    """
    if manifest.search is None:
        raise HTTPException(status_code=400, detail={"error": "ValueError", "message": "search config is required"})
    try:
        result = PanController().search(manifest)
    except Exception as e:
        logger.warning(f"⚠️ Search failed: {e}")
        raise to_http_error(e)
    response = {
        "result": result.to_json(include_all=all),
        "aggregate_costs": result.aggregate_costs,
    }
    if include_trace:
        response["trace"] = result.trace.to_json()
    return response


@router.get("/algorithms")
def list_algorithms():
    """List the registered search algorithms"""
    return {"algorithms": registered_algos()}
