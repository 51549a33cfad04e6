# tests/test_reference_equivalence.py
"""Differential tests: compiled checkpoints and search results against independent answers."""
import numpy as np
import pytest

from lang import load_program
from runtime.errors import PanRuntimeError
from services.search_engine import NoSurvivingBranch
from tests.oracles import (
    RefOutcome,
    TooManyLeaves,
    checkpoint_outcome,
    dijkstra,
    enumerate_leaves,
    global_best_of_n,
    local_best_of_n,
    returned_pairs,
    run_reference,
)
from tests.program_gen import ProgramGenerator, layered_program
from tests.support import corpus_source, run_to_end, start
from tests.test_search_engine import run

LEAF_LIMIT = 200


def generated(seed):
    text = ProgramGenerator(seed).program()
    program, _ = load_program(text)
    return text, program, {"n": seed % 7 - 2}


def layered(seed):
    levels = 2 + seed % 2
    text = layered_program(seed, levels)
    program, _ = load_program(text)
    w = [int(x) for x in np.random.default_rng(seed + 1000).integers(-3, 5, size=levels)]
    return text, program, {"w": w}


def search_pairs(text, algo, params, args):
    try:
        result, _ = run(text, algo, params, args=args)
    except (NoSurvivingBranch, PanRuntimeError):
        return []
    return result.all


# ----------------------------
# Straight-line runs
# ----------------------------

@pytest.mark.parametrize("seed", range(60))
def test_first_path_matches_the_reference_interpreter(seed):
    text, program, args = generated(seed)
    expected, _ = run_reference(program, args)
    try:
        outcome = checkpoint_outcome(run_to_end(start(text, args)))
    except PanRuntimeError as e:
        outcome = RefOutcome("error", e.tag)
    assert outcome.key() == expected.key(), text


# ----------------------------
# Exhaustive search
# ----------------------------

@pytest.mark.parametrize("seed", range(200))
def test_dfs_enumerates_every_leaf_in_order(seed):
    text, program, args = generated(10_000 + seed)
    try:
        leaves = enumerate_leaves(program, args, limit=LEAF_LIMIT)
    except TooManyLeaves:
        pytest.skip("tree too large to enumerate")
    assert search_pairs(text, "dfs", {}, args) == returned_pairs(leaves), text


@pytest.mark.parametrize("seed", range(50))
def test_layered_programs_enumerate_the_same_under_dfs_bfs_and_full_beam(seed):
    text, program, args = layered(seed)
    expected = returned_pairs(enumerate_leaves(program, args))
    assert search_pairs(text, "dfs", {}, args) == expected
    assert sorted(search_pairs(text, "bfs", {}, args)) == sorted(expected)
    full_beam = search_pairs(text, "beam", {"beam_width": 1000, "default_branching": None}, args)
    assert sorted(full_beam) == sorted(expected)


# ----------------------------
# Best-of-N and beam
# ----------------------------

@pytest.mark.parametrize("seed", range(50))
def test_greedy_beam_is_local_best_of_n(seed):
    text, program, args = layered(seed)
    n = 1 + seed % 4
    expected = local_best_of_n(program, args, n)
    assert search_pairs(text, "beam", {"beam_width": 1, "default_branching": n}, args) == expected


@pytest.mark.parametrize("seed", range(50))
def test_sampling_and_wide_root_beam_are_global_best_of_n(seed):
    text, program, args = layered(seed)
    n = 1 + seed % 4
    expected = global_best_of_n(program, args, n)
    assert search_pairs(text, "sampling", {"num_rollouts": n}, args) == expected
    wide_root = search_pairs(
        text, "beam", {"beam_width": n, "default_branching": 1, "root_branching": n}, args
    )
    assert sorted(wide_root) == sorted(expected)


@pytest.mark.parametrize("seed", range(50))
def test_width_one_beam_is_a_plain_run(seed):
    text, _, args = layered(seed)
    cp = run_to_end(start(text, args))
    assert search_pairs(text, "beam", {"beam_width": 1, "default_branching": 1}, args) == [
        (cp.return_value, cp.score)
    ]


# ----------------------------
# Graph search
# ----------------------------

def random_graph(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(3, 7))
    nodes = [f"n{i}" for i in range(size)]
    graph = {node: [] for node in nodes}
    for a, b in zip(nodes, nodes[1:]):
        graph[a].append([b, int(rng.integers(1, 10))])
    for _ in range(int(rng.integers(0, size * 2))):
        a, b = (nodes[int(i)] for i in rng.choice(size, size=2, replace=False))
        if all(edge[0] != b for edge in graph[a]):
            graph[a].append([b, int(rng.integers(1, 10))])
    goal = nodes[-1]
    if seed % 2:
        heuristic = {node: 0 for node in nodes}
    else:
        # half the true remaining cost never overshoots
        heuristic = {node: (dijkstra(graph, node, goal) or 0) // 2 for node in nodes}
    return {"graph": graph, "start": nodes[0], "goal": goal, "heuristic": heuristic}


@pytest.mark.parametrize("seed", range(100))
def test_best_first_graph_search_finds_the_shortest_path(seed):
    args = random_graph(seed)
    expected = dijkstra(args["graph"], args["start"], args["goal"])
    result, _ = run(
        corpus_source("graph_search.pan"),
        "best_first",
        {"top_k_popped": 1, "default_branching": None, "max_num_results": 1},
        args=args,
    )
    value, score = result.best
    assert value["cost"] == expected
    assert score == -expected
    path = value["path"]
    assert (path[0], path[-1]) == (args["start"], args["goal"])
    weights = {(a, b): w for a, edges in args["graph"].items() for b, w in edges}
    assert sum(weights[(a, b)] for a, b in zip(path, path[1:])) == expected
