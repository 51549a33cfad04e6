# cli.py
"""The `pan` command: run, search, compile and serve PanScript programs.

Results go to stdout as JSON; logs and error objects go to stderr.
Exit codes: 0 success, 1 program error, 2 usage or diagnostics.
"""
import argparse
import json
import logging
import sys
from typing import Any, List, Optional

from api.config import get_settings
from api.errors import error_payload, is_program_error
from compiler.emit import EMIT_MODES
from lang.diagnostics import PanError
from services.controller import PanController, RunManifest, parse_json_args
from services.search_engine import SearchConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PROGRAM_ERROR = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits on its own; usage errors still need the JSON error line and code 2."""

    def error(self, message: str):
        _print_error({"error": "UsageError", "message": message})
        raise SystemExit(EXIT_USAGE)


def _print_json(value: Any) -> None:
    sys.stdout.write(json.dumps(value, ensure_ascii=False) + "\n")


def _print_error(payload: dict) -> None:
    sys.stderr.write(json.dumps(payload, ensure_ascii=False) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pan", description="Run and search PanScript programs.")
    parser.add_argument("--log-level", default=None, help="Logging level (default from PAN_LOG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_program_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("file", help="PanScript source file")
        p.add_argument("--entry", default=None, help="Entry function (default: main, else the first function)")
        p.add_argument("--args", default=None, help="Entry arguments as a JSON object")
        p.add_argument("--provider", default=None, help="Provider script (JSON)")
        p.add_argument("--seed", type=int, default=None, help="Session seed")

    run = sub.add_parser("run", help="Step every branchpoint once and print the return value")
    add_program_flags(run)

    search = sub.add_parser("search", help="Search the execution tree and print the best result")
    add_program_flags(search)
    search.add_argument("--algo", required=True, help="Registered search algorithm")
    search.add_argument("--params", default=None, help="Algorithm parameters as a JSON object")
    search.add_argument("--all", action="store_true", help="Print every result, not just the best")
    search.add_argument("--parallelism", type=int, default=None, help="Worker pool size for expansion")
    search.add_argument("--trace", default=None, help="Write the search tree as JSON")
    search.add_argument("--trace-dot", default=None, help="Write the search tree as Graphviz DOT")

    compile_ = sub.add_parser("compile", help="Print the AST, normalized form or CPS body graph")
    compile_.add_argument("file", help="PanScript source file")
    compile_.add_argument("--emit", choices=EMIT_MODES, default="cps")
    compile_.add_argument("--entry", default=None)

    serve = sub.add_parser("serve", help="Serve the HTTP API")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def _manifest(args: argparse.Namespace, search: Optional[SearchConfig] = None) -> RunManifest:
    return RunManifest(
        program_path=args.file,
        entry=args.entry,
        args=parse_json_args(args.args),
        provider_path=args.provider,
        seed=args.seed,
        search=search,
        trace_path=getattr(args, "trace", None),
        trace_dot_path=getattr(args, "trace_dot", None),
    )


def cmd_run(args: argparse.Namespace, controller: PanController) -> int:
    outcome = controller.run(_manifest(args))
    _print_json(outcome.to_json())
    return EXIT_OK


def cmd_search(args: argparse.Namespace, controller: PanController) -> int:
    params = json.loads(args.params) if args.params else {}
    if not isinstance(params, dict):
        raise ValueError("--params must be a JSON object")
    config = SearchConfig(algo=args.algo, params=params, max_parallelism=args.parallelism)
    result = controller.search(_manifest(args, config))
    _print_json(result.to_json(include_all=args.all))
    return EXIT_OK


def cmd_compile(args: argparse.Namespace, controller: PanController) -> int:
    text = controller.emit(RunManifest(program_path=args.file, entry=args.entry), args.emit)
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, controller: PanController) -> int:
    from main import serve

    serve(args.host, args.port)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "search": cmd_search,
    "compile": cmd_compile,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    settings = get_settings()
    level = (args.log_level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )

    try:
        return COMMANDS[args.command](args, PanController(settings))
    except Exception as e:
        if is_program_error(e):
            _print_error(error_payload(e))
            return EXIT_PROGRAM_ERROR
        if isinstance(e, (PanError, ValueError, OSError)):
            _print_error(error_payload(e))
            return EXIT_USAGE
        logger.exception(f"❌ pan {args.command} failed")
        _print_error(error_payload(e))
        return EXIT_PROGRAM_ERROR


if __name__ == "__main__":
    sys.exit(main())
