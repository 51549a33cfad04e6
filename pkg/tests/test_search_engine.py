# tests/test_search_engine.py
import json

import pytest
from pydantic import ValidationError

from services.checkpoint import Status
from services.search_engine import (
    DuplicateAlgo,
    NoSurvivingBranch,
    SearchConfig,
    SearchConfigError,
    UnknownAlgo,
    harvest,
    register_algo,
    registered_algos,
    run_search,
    search,
    search_algo,
    search_multiple,
)
from runtime.provider import ErrorScript, OpScript, ProviderScript
from tests.support import compile_source, corpus_provider, corpus_source, make_session

BUILT_IN = [
    "beam", "best_first", "best_first_explorative", "best_first_reexpand", "bfs", "dfs", "mcts",
    "parallel_beam", "parallel_bfs", "parallel_dfs", "parallel_sampling", "sampling",
]

UNEVEN = """
fn main() {
  a = choose([1, 2])
  if a == 1 {
    b = choose(["x", "y"])
    return [a, b]
  }
  return [a]
}
"""

COSTLY = """
fn main() {
  branchpoint()
  record_costs(tokens=2)
  branchpoint()
  record_costs(tokens=3)
  return 1
}
"""

STOP_AT_THREE = """
fn main() {
  branchpoint(name="s")
  x = perform("llm.x")
  record_score(x)
  if x == 3 {
    early_stop()
  }
  return x
}
"""


def run(source, algo, params=None, script=None, seed=0, args=None, parallelism=None):
    session = make_session(script, seed)
    config = SearchConfig(algo=algo, params=params or {}, max_parallelism=parallelism)
    return run_search(compile_source(source), args or {}, config, session), session


def run_corpus(name, algo, params=None, seed=0, args=None):
    script = corpus_provider(name.replace(".pan", ".json"))
    return run(corpus_source(name), algo, params, script, seed, args)


# ----------------------------
# Registry and configuration
# ----------------------------

def test_built_in_algorithms_are_registered():
    assert set(BUILT_IN) <= set(registered_algos())


def test_duplicate_registration_is_rejected():
    with pytest.raises(DuplicateAlgo):
        register_algo("bfs", lambda: None)


def test_unknown_algorithm_and_params():
    with pytest.raises(UnknownAlgo, match="unknown search algorithm nope"):
        SearchConfig(algo="nope").resolve()
    with pytest.raises(SearchConfigError, match="unknown params for beam: width"):
        SearchConfig(algo="beam", params={"width": 2}).resolve()


def test_bad_param_values():
    with pytest.raises(SearchConfigError, match="beam_width"):
        run(COSTLY, "beam", {"beam_width": 0})
    with pytest.raises(SearchConfigError, match="unknown value function"):
        run(COSTLY, "mcts", {"value_fn": "oracle"})
    with pytest.raises(ValidationError):
        SearchConfig(algo="bfs", max_parallelism=0)


def test_plain_branchpoint_needs_a_branching_factor():
    with pytest.raises(SearchConfigError, match="needs a branching factor"):
        run(COSTLY, "dfs")


def test_custom_algorithm(algo_registry):
    def always_first():
        def body(root, ctx):
            cp = root
            while cp.status == Status.RUNNING:
                cp = ctx.expand(cp, 1)[0]
            yield from harvest(cp)

        return body

    register_algo("always_first", always_first)
    result, _ = run(UNEVEN, "always_first")
    assert result.best == ([1, "x"], None)


def test_decorated_algorithm_registers_under_each_name(algo_registry):
    @search_algo("pool_first", default_parallelism=2)
    @search_algo("first")
    def first():
        def body(root, ctx):
            yield from harvest(ctx.expand(root, 1)[0])

        return body

    assert {"first", "pool_first"} <= set(registered_algos())
    result, _ = run("fn main() { x = choose([3, 1, 2])\n record_score(x)\n return x }", "pool_first")
    assert result.all == [(3, 3)]


def test_search_helpers():
    space = compile_source('fn main() { x = choose([3, 1, 2])\n record_score(x)\n return x }')
    assert search(space, {}, "bfs") == (3, 3)
    assert search_multiple(space, {}, "dfs") == [(3, 3), (1, 1), (2, 2)]


# ----------------------------
# Traversal order
# ----------------------------

def test_dfs_goes_deep_first():
    result, _ = run(UNEVEN, "dfs")
    assert [value for value, _ in result.all] == [[1, "x"], [1, "y"], [2]]


def test_bfs_goes_level_by_level():
    result, _ = run(UNEVEN, "bfs")
    assert [value for value, _ in result.all] == [[2], [1, "x"], [1, "y"]]


def test_no_surviving_branch():
    with pytest.raises(NoSurvivingBranch):
        run('fn main() { branchpoint()\n kill_branch("nope") }', "bfs", {"default_branching": 3})


# ----------------------------
# Scores, costs, early stop
# ----------------------------

def test_self_consistency_scores_by_agreement():
    result, _ = run_corpus("consistency.pan", "sampling", {"num_rollouts": 5})
    assert result.all == [("A", 3), ("A", 3), ("A", 3), ("B", 2), ("B", 2)]
    assert result.best == ("A", 3)


def test_discarded_protect_attempts_do_not_vote():
    source = """
    fn majority(answers) {
      return vote_counts(answers)
    }
    fn main() {
      branchpoint()
      a = perform("llm.answer")
      record_score(majority, a, label="q")
      ok = protect(perform("tool.flaky"), "Timeout", max_retries=5)
      return a
    }
    """
    script = ProviderScript(
        ops={
            "llm.answer": OpScript(responses=["B", "B", "B", "A", "A"]),
            "tool.flaky": OpScript(responses=["ok"] * 5),
        },
        errors={"tool.flaky": ErrorScript(fail_first_n=2, tag="Timeout")},
    )
    result, session = run(source, "sampling", {"num_rollouts": 3}, script=script)
    assert session.score_db.targets("q") == ["B", "A", "A"]
    assert result.all == [("B", 1), ("A", 2), ("A", 2)]
    assert result.best == ("A", 2)
    # trace nodes read the group scores as they stand now, not as they were when stepped
    assert [n["score"] for n in result.trace.to_json() if n["status"] == "RETURNED"] == [1, 2, 2]


def test_zero_range_step_kills_only_its_branch():
    source = "fn main() { k = choose([0, 1])\n xs = range(0, 3, k)\n return len(xs) }"
    result, _ = run(source, "dfs")
    assert result.all == [(3, None)]


def test_refinement_memory_is_shared_between_attempts():
    result, _ = run_corpus("refine.pan", "beam", {"beam_width": 1, "default_branching": 4})
    assert [value["seen"] for value, _ in result.all] == [0, 1, 2, 3]
    assert [score for _, score in result.all] == [1, 2, 4, 5]
    assert result.best[0]["code"] == "def sort(xs): return sorted(xs)"


def test_parallel_refinement_loops_keep_separate_memories():
    result, _ = run_corpus("parallel_refine.pan", "bfs")
    seen = [value["seen"] for value, _ in result.all]
    assert len(seen) == 6
    assert sorted(seen) == [0, 0, 1, 1, 2, 2]


@pytest.mark.parametrize(
    "algo, params, tokens",
    [
        ("bfs", {"default_branching": 2}, 2 * 2 + 4 * 3),
        ("sampling", {"num_rollouts": 3}, 3 * (2 + 3)),
        ("beam", {"beam_width": 1, "default_branching": 2}, 2 * 2 + 2 * 3),
    ],
)
def test_costs_are_aggregated_over_every_step(algo, params, tokens):
    result, _ = run(COSTLY, algo, params)
    assert result.aggregate_costs == {"tokens": tokens}
    assert sum(node["costs"].get("tokens", 0) for node in result.trace.to_json()) == tokens


@pytest.mark.parametrize("algo, params", [("sampling", {"num_rollouts": 10}), ("bfs", {"default_branching": 10})])
def test_early_stop_ends_the_search(algo, params):
    script = ProviderScript.scripted(llm__x=list(range(1, 11)))
    result, session = run(STOP_AT_THREE, algo, params, script)
    assert [value for value, _ in result.all] == [1, 2, 3]
    assert result.best == (3, 3)
    assert session.step_calls == 3
    assert not any(node["after_early_stop"] for node in result.trace.to_json())


def test_early_stop_with_workers_in_flight():
    script = ProviderScript.scripted(llm__x=list(range(1, 11)))
    result, session = run(STOP_AT_THREE, "parallel_bfs", {"default_branching": 10}, script)
    # one batch of four was in flight when the stop was requested
    assert session.step_calls <= 4
    assert len(result.all) <= 4
    assert 3 in [value for value, _ in result.all]


def test_reflexion_stops_on_first_passing_attempt():
    result, session = run_corpus("reflexion.pan", "best_first_reexpand", {"max_num_results": 5})
    assert result.all == [("v1: return a - b", 0.2), ("v2: return a + b", 1.0)]
    assert result.best == ("v2: return a + b", 1.0)
    assert session.early_stop


def test_graph_search_finds_the_cheapest_path():
    args = json.loads(corpus_source("graph_args.json"))
    result, _ = run(
        corpus_source("graph_search.pan"),
        "best_first",
        {"top_k_popped": 1, "default_branching": None, "max_num_results": 1},
        args=args,
    )
    value, score = result.best
    assert value == {"cost": 7, "path": ["a", "c", "b", "d", "e"]}
    assert score == -7


def test_two_stage_search_grades_every_pair():
    result, session = run_corpus("hypothesis.pan", "parallel_bfs")
    assert len(result.all) == 64
    assert len(result.trace) == 1 + 8 + 64
    assert result.best[1] == max(score for _, score in result.all)


def test_local_and_global_best_of_n():
    local, _ = run_corpus("stepwise.pan", "beam", {"beam_width": 1, "default_branching": 4})
    global_, _ = run_corpus(
        "stepwise.pan", "beam", {"beam_width": 4, "default_branching": 1, "root_branching": 4}
    )
    assert len(local.all) == 4 and len(global_.all) == 4
    assert len(local.trace) == 1 + 3 * 4
    assert len(global_.trace) == 1 + 3 * 4
    for result in (local, global_):
        for steps, score in result.all:
            assert score == sum(steps)


def test_sampling_is_reproducible_for_a_seed():
    first, _ = run_corpus("bon.pan", "sampling", {"num_rollouts": 10}, seed=4)
    second, _ = run_corpus("bon.pan", "sampling", {"num_rollouts": 10}, seed=4)
    assert first.all == second.all
    assert first.best[1] == max(score for _, score in first.all)


def test_parallel_sampling_runs_every_rollout():
    result, session = run_corpus("bon.pan", "parallel_sampling", {"num_rollouts": 10})
    assert len(result.all) == 10
    assert session.step_calls == 10


def test_mcts_finds_the_best_leaf():
    source = """
    fn main() {
      a = choose([0, 1])
      b = choose([0, 1])
      record_score(a * 2 + b)
      return a * 2 + b
    }
    """
    result, session = run(source, "mcts", {"num_iterations": 20})
    again, _ = run(source, "mcts", {"num_iterations": 20})
    assert result.best == (3, 3)
    assert result.all == again.all
    assert session.step_calls <= 20



def test_mcts_visits_the_better_arm_more_often():
    source = """
    fn main() {
      arm = choose([0, 1])
      if arm == 0 {
        branchpoint(name="left")
      } else {
        branchpoint(name="right")
      }
      record_score(arm)
      return arm
    }
    """
    _, session = run(source, "mcts", {"num_iterations": 50, "default_branching": 50})
    # every visit to an arm past its first samples one new child there
    counts = session.branchpoint_step_counts
    assert counts["left"] + counts["right"] == 48
    assert counts["right"] > 2 * counts["left"]


TIES = "fn main() { x = choose([1, 2, 3, 4])\n branchpoint()\n return x }"


def test_shuffle_ties_is_seeded():
    params = {"beam_width": 2, "root_branching": 4, "shuffle_ties": True}
    plain, _ = run(TIES, "beam", {"beam_width": 2, "root_branching": 4})
    assert [value for value, _ in plain.all] == [1, 2]
    kept = []
    for seed in range(10):
        first, _ = run(TIES, "beam", params, seed=seed)
        again, _ = run(TIES, "beam", params, seed=seed)
        assert first.all == again.all
        values = [value for value, _ in first.all]
        assert len(values) == len(set(values)) == 2 and set(values) <= {1, 2, 3, 4}
        kept.append(tuple(values))
    assert len(set(kept)) > 1


def test_explorative_without_bonus_matches_reexpand():
    reexpanded, _ = run_corpus("stepwise.pan", "best_first_reexpand", {"max_expansions": 12})
    flat, _ = run_corpus("stepwise.pan", "best_first_explorative", {"max_expansions": 12, "exploration_c": 0})
    assert flat.all == reexpanded.all
    assert flat.trace.to_json() == reexpanded.trace.to_json()


LADDER = """
fn main() {
  a = choose([1, 2])
  record_score(a)
  b = choose([10, 20])
  record_score(a * b)
  return a * b
}
"""


def test_reexpand_pops_top_k_states_per_round():
    one, _ = run(LADDER, "best_first_reexpand", {"max_expansions": 3})
    two, _ = run(LADDER, "best_first_reexpand", {"max_expansions": 3, "top_k_popped": 2, "default_branching": 1})
    assert one.all == [(10, 10), (20, 20)]
    assert two.all == [(10, 10)]
    with pytest.raises(SearchConfigError, match="one child per pop"):
        run(LADDER, "best_first_explorative", {"default_branching": 3})

@pytest.mark.parametrize(
    "name, algo, params",
    [
        ("bon.pan", "sampling", {"num_rollouts": 10}),
        ("refine.pan", "beam", {"beam_width": 1, "default_branching": 4}),
        ("stepwise.pan", "best_first_explorative", {"max_expansions": 12}),
        ("parallel_refine.pan", "dfs", {}),
    ],
)
def test_trace_has_one_node_per_step(name, algo, params):
    result, session = run_corpus(name, algo, params)
    nodes = result.trace.to_json()
    assert len(nodes) == 1 + session.step_calls
    assert nodes[0]["parent"] is None
    assert all(node["parent"] < node["id"] for node in nodes[1:])
