# tests/conftest.py
import pytest

from api.config import Settings, get_settings
from services.controller import PanController
from services.search_engine import registered_algos, unregister_algo


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture
def controller(settings):
    return PanController(settings)


@pytest.fixture
def clean_settings_cache():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def algo_registry():
    """Drop any algorithm a test registers."""
    before = set(registered_algos())
    yield
    for name in set(registered_algos()) - before:
        unregister_algo(name)
