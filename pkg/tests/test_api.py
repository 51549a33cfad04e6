# tests/test_api.py
import pytest
from fastapi.testclient import TestClient

from main import app
from tests.support import corpus_source

client = TestClient(app)

PICK = "fn main() { x = choose([3, 1, 2])\n record_score(x)\n return x }"


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_algorithms_are_listed():
    names = client.get("/algorithms").json()["algorithms"]
    assert "beam" in names and "mcts" in names


def test_run_returns_value_and_effects():
    response = client.post(
        "/run",
        json={
            "source": 'fn main(q) { a = perform("llm.answer", q)\n record_costs(tokens=4)\n return a }',
            "args": {"q": "why?"},
            "provider": {"ops": {"llm.answer": {"responses": ["because"]}}},
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["value"] == "because"
    assert body["costs"] == {"tokens": 4}
    assert body["effects"][0]["op"] == "llm.answer"


def test_search_returns_best_and_trace():
    response = client.post(
        "/search",
        params={"all": True, "include_trace": True},
        json={"source": PICK, "search": {"algo": "bfs"}},
    )
    assert response.status_code == 200
    body = response.json()
    assert [r["value"] for r in body["result"]] == [3, 1, 2]
    assert len(body["trace"]) == 4

    best = client.post("/search", json={"source": PICK, "search": {"algo": "dfs"}}).json()
    assert best["result"] == {"value": 3, "score": 3}


def test_compile_emits_the_body_graph():
    response = client.post("/compile", json={"source": corpus_source("cps_example.pan")})
    assert response.status_code == 200
    assert response.json()["text"].startswith("entry main -> main:entry")


@pytest.mark.parametrize(
    "path, payload",
    [
        ("/search", {"source": PICK}),
        ("/search", {"source": PICK, "search": {"algo": "nope"}}),
        ("/run", {"source": "fn main() { return y }"}),
        ("/run", {"source": "fn main( {"}),
        ("/compile", {"source": PICK, "emit": "bytecode"}),
    ],
)
def test_bad_requests_are_400(path, payload):
    response = client.post(path, json=payload)
    assert response.status_code == 400
    assert "error" in response.json()["detail"]


@pytest.mark.parametrize(
    "payload, tag",
    [
        ({"source": "fn main() { branchpoint()\n return 1 / 0 }"}, "DivZero"),
        ({"source": 'fn main() { kill_branch("no") }', "search": {"algo": "bfs"}}, "NoSurvivingBranch"),
    ],
)
def test_program_errors_are_422(payload, tag):
    path = "/search" if "search" in payload else "/run"
    response = client.post(path, json=payload)
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == tag


def test_manifest_needs_exactly_one_program():
    response = client.post("/run", json={})
    assert response.status_code == 422
