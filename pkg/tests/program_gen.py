# tests/program_gen.py
"""Random PanScript programs for differential tests.

Every generated program validates, terminates, and only uses names that
are bound on every path before they are read. choose and branchpoint only
appear as whole statements so that evaluation order does not depend on
primitive lifting.
"""
from __future__ import annotations

from typing import List, Optional, Set

import numpy as np


class ProgramGenerator:
    def __init__(self, seed: int, choose_weight: float = 1.0, max_depth: int = 2):
        self.rng = np.random.default_rng(seed)
        self.choose_weight = choose_weight
        self.max_depth = max_depth
        self._fresh = 0
        self._has_list = True
        self.pure: List[str] = []
        self.flows: List[str] = []

    # ----------------------------
    # helpers
    # ----------------------------

    def _pick(self, options):
        return options[int(self.rng.integers(len(options)))]

    def _chance(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def _fresh_name(self, prefix: str = "v") -> str:
        self._fresh += 1
        return f"{prefix}{self._fresh}"

    # ----------------------------
    # expressions
    # ----------------------------

    def int_expr(self, scope: List[str], depth: int = 0) -> str:
        leaf = depth >= 2 or self._chance(0.4)
        if leaf:
            if scope and self._chance(0.6):
                return self._pick(scope)
            return str(int(self.rng.integers(-3, 10)))
        kind = self._pick(["add", "sub", "mul", "mod", "div", "call", "len", "sum", "abs", "max"])
        a = self.int_expr(scope, depth + 1)
        b = self.int_expr(scope, depth + 1)
        if kind == "add":
            return f"({a} + {b})"
        if kind == "sub":
            return f"({a} - {b})"
        if kind == "mul":
            return f"({a} * {b})"
        if kind == "mod":
            return f"({a} % {int(self.rng.integers(2, 8))})"
        if kind == "div" and self._chance(0.3):
            return f"({a} / {b})"
        if kind == "call" and self.pure:
            return f"{self._pick(self.pure)}({a}, {b})"
        if kind == "len" and self._has_list:
            return "len(xs)"
        if kind == "sum" and self._has_list:
            return "sum(xs)"
        if kind == "abs":
            return f"abs({a})"
        return f"max({a}, {b})"

    def cond_expr(self, scope: List[str]) -> str:
        kind = self._pick(["lt", "eq", "even", "and", "not"])
        a = self.int_expr(scope, 1)
        if kind == "lt":
            return f"{a} < {self.int_expr(scope, 1)}"
        if kind == "eq":
            return f"{a} == {self.int_expr(scope, 1)}"
        if kind == "even":
            return f"{a} % 2 == 0"
        if kind == "and":
            return f"({a} > 0 && {self.int_expr(scope, 1)} < 5)"
        return f"!({a} > 2)"

    def choices(self, scope: List[str]) -> str:
        kind = self._pick(["list", "range", "xs"])
        if kind == "range":
            return f"range({int(self.rng.integers(0, 4))})"
        if kind == "xs":
            return "xs"
        items = [self.int_expr(scope, 1) for _ in range(int(self.rng.integers(1, 4)))]
        return "[" + ", ".join(items) + "]"

    # ----------------------------
    # statements
    # ----------------------------

    def block(self, scope: List[str], fixed: Set[str], depth: int, in_loop: bool, count: int) -> List[str]:
        """Statements for a nested block: only existing names are assigned."""
        lines: List[str] = []
        targets = [n for n in scope if n not in fixed]
        for _ in range(count):
            lines.extend(self.statement(scope, targets, fixed, depth, in_loop, top=False))
        return lines

    def statement(
        self, scope: List[str], targets: List[str], fixed: Set[str], depth: int, in_loop: bool, top: bool
    ) -> List[str]:
        kinds = ["assign", "append", "score"]
        kinds += ["choose"] * max(1, int(self.choose_weight * 2))
        kinds += ["branchpoint"]
        if self.flows:
            kinds.append("searchover")
        if depth < self.max_depth:
            kinds += ["if", "for", "while"]
        if self._chance(0.1):
            kinds.append("kill")
        if in_loop:
            kinds.append("break")
        kind = self._pick(kinds)

        def target() -> Optional[str]:
            if top or not targets:
                name = self._fresh_name()
                return name
            return self._pick(targets)

        if kind == "assign":
            value = self.int_expr(scope)
            name = target()
            self._bind(name, scope, targets, top)
            return [f"{name} = {value}"]
        if kind == "append":
            return [f"append(xs, {self.int_expr(scope)})"]
        if kind == "score":
            return [f"record_score({self.int_expr(scope)})"]
        if kind == "choose":
            choices = self.choices(scope)
            name = target()
            self._bind(name, scope, targets, top)
            return [f"{name} = choose({choices})"]
        if kind == "branchpoint":
            return ["branchpoint(branching=1)"]
        if kind == "searchover":
            arg = self.int_expr(scope)
            name = target()
            self._bind(name, scope, targets, top)
            return [f"{name} = searchover({self._pick(self.flows)}({arg}))"]
        if kind == "kill":
            return [f"if {self.cond_expr(scope)} {{", '  kill_branch("pruned")', "}"]
        if kind == "break":
            return [f"if {self.cond_expr(scope)} {{", "  break", "}"]
        if kind == "if":
            cond = self.cond_expr(scope)
            then = self.block(list(scope), fixed, depth + 1, in_loop, int(self.rng.integers(1, 3)))
            lines = [f"if {cond} {{", *("  " + l for l in then)]
            if self._chance(0.5):
                other = self.block(list(scope), fixed, depth + 1, in_loop, int(self.rng.integers(1, 3)))
                lines += ["} else {", *("  " + l for l in other)]
            return lines + ["}"]
        if kind == "for":
            var = self._fresh_name("i")
            iterable = self._pick([f"range({int(self.rng.integers(0, 4))})", "xs"])
            body = self.block(scope + [var], fixed | {var}, depth + 1, True, int(self.rng.integers(1, 3)))
            return [f"for {var} in {iterable} {{", *("  " + l for l in body), "}"]
        # while with its own counter so every loop terminates
        counter = self._fresh_name("c")
        bound = int(self.rng.integers(1, 4))
        body = self.block(scope + [counter], fixed | {counter}, depth + 1, True, int(self.rng.integers(1, 3)))
        return [
            f"{counter} = 0",
            f"while {counter} < {bound} {{",
            f"  {counter} = {counter} + 1",
            *("  " + l for l in body),
            "}",
        ]

    @staticmethod
    def _bind(name: str, scope: List[str], targets: List[str], top: bool) -> None:
        if top and name not in scope:
            scope.append(name)
            targets.append(name)

    # ----------------------------
    # functions
    # ----------------------------

    def pure_function(self) -> str:
        name = f"pure{len(self.pure)}"
        self._has_list = False
        body = self.int_expr(["a", "b"])
        self._has_list = True
        text = f"fn {name}(a, b) {{\n  if a < b {{\n    return {body}\n  }}\n  return a - b\n}}"
        self.pure.append(name)
        return text

    def flow_function(self) -> str:
        name = f"flow{len(self.flows)}"
        lines = [f"fn {name}(p) {{", "  xs = [p]"]
        scope = ["p"]
        targets = ["p"]
        for _ in range(int(self.rng.integers(1, 4))):
            lines.extend("  " + l for l in self.statement(scope, targets, set(), self.max_depth, False, top=True))
        lines += [f"  return {self.int_expr(scope)}", "}"]
        self.flows.append(name)
        return "\n".join(lines)

    def program(self) -> str:
        parts = [self.pure_function() for _ in range(int(self.rng.integers(0, 3)))]
        parts += [self.flow_function() for _ in range(int(self.rng.integers(0, 2)))]
        scope = ["n", "acc"]
        targets = ["acc"]
        lines = ["fn main(n) {", "  xs = []", "  acc = n"]
        for _ in range(int(self.rng.integers(3, 8))):
            lines.extend("  " + l for l in self.statement(scope, targets, {"n"}, 0, False, top=True))
        lines += [f"  return [acc, sum(xs), {self.int_expr(scope)}]", "}"]
        parts.append("\n".join(lines))
        return "\n\n".join(parts) + "\n"


def layered_program(seed: int, levels: int = 3) -> str:
    """A fixed-depth chain of chooses, scored after every level.

    Every path has the same number of choose sites, so beam and best-of-N
    searches see all their survivors at the same depth.
    """
    rng = np.random.default_rng(seed)
    lines = ["fn main(w) {", "  acc = 0"]
    for level in range(levels):
        width = int(rng.integers(2, 5))
        items = ", ".join(str(int(x)) for x in rng.integers(-4, 10, size=width))
        mult = int(rng.integers(2, 6))
        mod = int(rng.integers(5, 13))
        lines += [
            f"  x{level} = choose([{items}])",
            f"  acc = acc * {mult} + x{level} * w[{level}]",
            f"  record_score((acc % {mod}) - {level})",
        ]
    lines += ["  return acc", "}"]
    return "\n".join(lines) + "\n"
