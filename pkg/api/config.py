# api/config.py
import os
from functools import lru_cache

from pydantic import BaseModel, Field


class Settings(BaseModel):
    default_seed: int = 0
    log_level: str = "WARNING"
    max_parallelism: int = Field(1, ge=1)
    host: str = "127.0.0.1"
    port: int = 8001

    @classmethod
    def from_env(cls) -> "Settings":
        env = {
            "default_seed": os.getenv("PAN_DEFAULT_SEED"),
            "log_level": os.getenv("PAN_LOG_LEVEL"),
            "max_parallelism": os.getenv("PAN_MAX_PARALLELISM"),
            "host": os.getenv("PAN_HOST"),
            "port": os.getenv("PAN_PORT"),
        }
        return cls(**{key: value for key, value in env.items() if value is not None})


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_env()
