# main.py
import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.config import get_settings
from api.routes_compile import router as compile_router
from api.routes_run import router as run_router
from api.routes_search import router as search_router
from services.search_engine import registered_algos

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

# ----------------------------
# 1️⃣ Setup FastAPI app
# ----------------------------
app = FastAPI(title="PanScript Search API")

app.include_router(run_router, tags=["Run"])
app.include_router(search_router, tags=["Search"])
app.include_router(compile_router, tags=["Compile"])

# Allow CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/health")
def health_check():
    return {"status": "ok", "algorithms": len(registered_algos())}


def serve(host: str = None, port: int = None) -> None:
    import uvicorn

    settings = get_settings()
    host = host or settings.host
    port = port or settings.port
    logger.info(f"🔄 Serving PanScript API on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port)


# ----------------------------
# 2️⃣ Run server
# ----------------------------
if __name__ == "__main__":
    serve()
