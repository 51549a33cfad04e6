# tests/test_cli.py
import json
import shlex

import pytest

import cli
from tests.support import CORPUS, ROOT


def pan(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="prog.pan"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def documented_commands():
    """The `pan ...` invocations written in the corpus file headers."""
    commands = []
    for path in sorted(CORPUS.glob("*.pan")):
        current = None
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.startswith("#"):
                break
            text = line.lstrip("#").strip()
            if current is None and text.startswith("pan "):
                current = text
            elif current is not None:
                current += " " + text
            else:
                continue
            if current.endswith("\\"):
                current = current[:-1].rstrip()
            else:
                commands.append(pytest.param(current, id=f"{path.stem}-{len(commands)}"))
                current = None
    return commands


# ----------------------------
# run
# ----------------------------

def test_run_prints_the_return_value(capsys):
    code, out, _ = pan(capsys, "run", CORPUS / "hello.pan")
    assert code == cli.EXIT_OK
    assert json.loads(out) == "hello, world; hello, search"


def test_run_passes_json_args(tmp_path, capsys):
    path = write(tmp_path, "fn main(a, b) { return [a + b, a / b] }")
    code, out, _ = pan(capsys, "run", path, "--args", '{"a": 3, "b": 2}')
    assert code == cli.EXIT_OK
    assert json.loads(out) == [5, 1.5]


def test_entry_defaults_to_the_first_function(tmp_path, capsys):
    path = write(tmp_path, "fn solve() { return 7 }\nfn other() { return 8 }")
    assert pan(capsys, "run", path)[:2] == (cli.EXIT_OK, "7\n")
    assert pan(capsys, "run", path, "--entry", "other")[:2] == (cli.EXIT_OK, "8\n")


@pytest.mark.parametrize(
    "source, tag",
    [
        ("fn main() { branchpoint()\n x = 1 / 0\n return x }", "DivZero"),
        ('fn main() { branchpoint()\n kill_branch("no") }', "KilledBranch"),
        ('fn main() { x = perform("llm.answer")\n return x }', "ProviderExhausted"),
        ("fn main() { x = choose([])\n return x }", "FinishedStepping"),
        ("fn main() { k = 0\n xs = range(0, 3, k)\n return xs }", "TypeError"),
        ("fn main() { x = 1e308\n return int(x * 10.0) }", "OverflowError"),
    ],
)
def test_program_errors_exit_1(tmp_path, capsys, source, tag):
    code, out, err = pan(capsys, "run", write(tmp_path, source))
    assert code == cli.EXIT_PROGRAM_ERROR
    assert out == ""
    assert json.loads(err.strip().splitlines()[-1])["error"] == tag


def test_invalid_programs_exit_2_with_diagnostics(tmp_path, capsys):
    code, _, err = pan(capsys, "run", write(tmp_path, "fn main() { return y }"))
    assert code == cli.EXIT_USAGE
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ProgramInvalid"
    assert "unknown name y" in payload["diagnostics"][0]["message"]


def test_deeply_nested_source_is_a_clean_parse_error(tmp_path, capsys):
    source = "fn main() { return " + "(" * 3000 + "1" + ")" * 3000 + " }"
    code, _, err = pan(capsys, "run", write(tmp_path, source))
    assert code == cli.EXIT_USAGE
    assert "Traceback" not in err
    assert "nested too deeply" in json.loads(err.strip().splitlines()[-1])["message"]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["launch"],
        ["run", "missing.pan"],
        ["run", str(CORPUS / "hello.pan"), "--args", "[1, 2]"],
        ["run", str(CORPUS / "hello.pan"), "--args", "{not json"],
        ["compile", str(CORPUS / "hello.pan"), "--emit", "bytecode"],
        ["search", str(CORPUS / "hello.pan"), "--algo", "nope"],
        ["search", str(CORPUS / "hello.pan"), "--algo", "beam", "--params", '{"width": 2}'],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = pan(capsys, *argv)
    assert code == cli.EXIT_USAGE
    assert "error" in json.loads(err.strip().splitlines()[-1])


# ----------------------------
# search
# ----------------------------

def test_search_prints_best_or_all(capsys):
    argv = ["search", CORPUS / "consistency.pan", "--algo", "sampling", "--params", '{"num_rollouts": 5}',
            "--provider", CORPUS / "providers" / "consistency.json"]
    code, out, _ = pan(capsys, *argv)
    assert code == cli.EXIT_OK
    assert json.loads(out) == {"value": "A", "score": 3}
    code, out, _ = pan(capsys, *argv, "--all")
    assert [r["value"] for r in json.loads(out)] == ["A", "A", "A", "B", "B"]


def test_search_with_no_survivors_exits_1(tmp_path, capsys):
    path = write(tmp_path, 'fn main() { branchpoint()\n kill_branch("x") }')
    code, _, err = pan(capsys, "search", path, "--algo", "bfs", "--params", '{"default_branching": 2}')
    assert code == cli.EXIT_PROGRAM_ERROR
    assert json.loads(err.strip().splitlines()[-1])["error"] == "NoSurvivingBranch"


def test_seed_makes_searches_repeatable(capsys):
    argv = ["search", CORPUS / "bon.pan", "--algo", "sampling", "--params", '{"num_rollouts": 10}',
            "--provider", CORPUS / "providers" / "bon.json", "--all"]
    first = pan(capsys, *argv, "--seed", 3)
    again = pan(capsys, *argv, "--seed", 3)
    assert first[0] == cli.EXIT_OK
    assert first[1] == again[1]
    assert len(json.loads(first[1])) == 10


def test_search_writes_trace_files(tmp_path, capsys):
    trace, dot = tmp_path / "trace.json", tmp_path / "trace.dot"
    code, _, _ = pan(
        capsys, "search", CORPUS / "consistency.pan", "--algo", "sampling", "--params", '{"num_rollouts": 2}',
        "--provider", CORPUS / "providers" / "consistency.json", "--trace", trace, "--trace-dot", dot,
    )
    assert code == cli.EXIT_OK
    nodes = json.loads(trace.read_text(encoding="utf-8"))
    assert nodes[0]["parent"] is None
    assert all(node["parent"] is not None for node in nodes[1:])
    assert dot.read_text(encoding="utf-8").startswith("digraph search_tree {")


def test_parallelism_flag_is_validated(capsys):
    code, _, _ = pan(capsys, "search", CORPUS / "hello.pan", "--algo", "bfs", "--parallelism", 0)
    assert code == cli.EXIT_USAGE


# ----------------------------
# compile
# ----------------------------

def test_compile_prints_the_body_graph(capsys):
    code, out, _ = pan(capsys, "compile", CORPUS / "cps_example.pan")
    assert code == cli.EXIT_OK
    assert out.startswith("entry main -> main:entry\n")
    assert "site 0 branchpoint in main at 6:3" in out


@pytest.mark.parametrize("mode", ["ast", "normalized"])
def test_compile_other_forms(capsys, mode):
    code, out, _ = pan(capsys, "compile", CORPUS / "hello.pan", "--emit", mode)
    assert code == cli.EXIT_OK
    assert "fn main()" in out


# ----------------------------
# Documented corpus commands
# ----------------------------

@pytest.mark.parametrize("command", documented_commands())
def test_documented_corpus_commands_succeed(command, capsys, monkeypatch):
    monkeypatch.chdir(ROOT)
    args_json = (CORPUS / "graph_args.json").read_text(encoding="utf-8")
    argv = [args_json if a == "$(cat corpus/graph_args.json)" else a for a in shlex.split(command)[1:]]
    code, out, err = pan(capsys, *argv)
    assert code == cli.EXIT_OK, err
    if argv[0] != "compile":
        json.loads(out)
