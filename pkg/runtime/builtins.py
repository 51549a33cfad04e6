# runtime/builtins.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from runtime.errors import PanRuntimeError
from runtime.values import (
    compare_values,
    check_int,
    display,
    index_get,
    is_number,
    materialize_iterable,
    type_name,
    values_equal,
    vote_counts,
)


@dataclass(frozen=True)
class Builtin:
    name: str
    fn: Callable[..., Any]
    min_args: int
    max_args: Optional[int]

    def __call__(self, args: List[Any]) -> Any:
        if len(args) < self.min_args or (self.max_args is not None and len(args) > self.max_args):
            expected = str(self.min_args) if self.min_args == self.max_args else f"{self.min_args}+"
            raise PanRuntimeError("TypeError", f"{self.name}() takes {expected} arguments, got {len(args)}")
        try:
            return self.fn(*args)
        except OverflowError as e:
            raise PanRuntimeError("OverflowError", f"{self.name}(): {e}")
        except ValueError as e:
            raise PanRuntimeError("TypeError", f"{self.name}(): {e}")


def _need(name: str, value: Any, *kinds: str) -> None:
    if type_name(value) not in kinds:
        raise PanRuntimeError("TypeError", f"{name}() got {type_name(value)}, expected {' or '.join(kinds)}")


def _finite(name: str, value: Any) -> None:
    if isinstance(value, float) and not math.isfinite(value):
        raise PanRuntimeError("OverflowError", f"{name}() cannot convert {value} to int")


def _len(value):
    _need("len", value, "list", "map", "str")
    return len(value)


def _append(items, value):
    _need("append", items, "list")
    items.append(value)
    return None


def _push(items, value):
    _need("push", items, "list")
    items.append(value)
    return items


def _keys(mapping):
    _need("keys", mapping, "map")
    return list(mapping.keys())


def _values(mapping):
    _need("values", mapping, "map")
    return list(mapping.values())


def _range(*args):
    for a in args:
        _need("range", a, "int")
    if len(args) == 3 and args[2] == 0:
        raise PanRuntimeError("TypeError", "range() step must not be zero")
    return list(range(*args))


def _abs(value):
    _need("abs", value, "int", "float")
    return check_int(abs(value)) if isinstance(value, int) else abs(value)


def _extreme(name: str, args, pick_first: Callable[[Any, Any], bool]):
    items = list(args[0]) if len(args) == 1 and isinstance(args[0], list) else list(args)
    if not items:
        raise PanRuntimeError("TypeError", f"{name}() of an empty sequence")
    best = items[0]
    for item in items[1:]:
        if pick_first(item, best):
            best = item
    return best


def _min(*args):
    return _extreme("min", args, lambda a, b: compare_values("<", a, b))


def _max(*args):
    return _extreme("max", args, lambda a, b: compare_values(">", a, b))


def _sorted(items):
    _need("sorted", items, "list")
    if all(is_number(i) for i in items) or all(isinstance(i, str) for i in items):
        return sorted(items)
    raise PanRuntimeError("TypeError", "sorted() needs a list of numbers or a list of strings")


def _sum(items):
    _need("sum", items, "list")
    total = 0
    for item in items:
        _need("sum", item, "int", "float")
        total = total + item
    return check_int(total) if isinstance(total, int) else total


def _int(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        _finite("int", value)
        return check_int(int(value))
    if isinstance(value, str):
        try:
            return check_int(int(value.strip()))
        except ValueError:
            raise PanRuntimeError("TypeError", f"invalid literal for int(): {value!r}")
    raise PanRuntimeError("TypeError", f"int() got {type_name(value)}")


def _float(value):
    if is_number(value):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            raise PanRuntimeError("TypeError", f"invalid literal for float(): {value!r}")
    raise PanRuntimeError("TypeError", f"float() got {type_name(value)}")


def _contains(container, item):
    if isinstance(container, dict):
        return isinstance(item, str) and item in container
    if isinstance(container, str):
        _need("contains", item, "str")
        return item in container
    _need("contains", container, "list")
    return any(values_equal(x, item) for x in container)


def _get(container, key, default=None):
    try:
        return index_get(container, key)
    except PanRuntimeError as e:
        if e.tag in ("KeyError", "IndexError"):
            return default
        raise


def _split(text, sep=None):
    _need("split", text, "str")
    if sep is not None:
        _need("split", sep, "str")
        if sep == "":
            raise PanRuntimeError("TypeError", "split() separator must not be empty")
    return text.split(sep)


def _join(items, sep=""):
    _need("join", items, "list")
    _need("join", sep, "str")
    return sep.join(display(i) for i in items)


def _slice(value, start, end=None):
    _need("slice", value, "list", "str")
    _need("slice", start, "int")
    if end is not None:
        _need("slice", end, "int")
    return value[start:end]


def _pop(items, index=None):
    _need("pop", items, "list")
    if not items:
        raise PanRuntimeError("IndexError", "pop from empty list")
    if index is None:
        return items.pop()
    _need("pop", index, "int")
    if not -len(items) <= index < len(items):
        raise PanRuntimeError("IndexError", f"pop index {index} out of range")
    return items.pop(index)


def _round(value, digits=None):
    _need("round", value, "int", "float")
    if digits is None:
        _finite("round", value)
        return check_int(round(value))
    _need("round", digits, "int")
    return round(value, digits)


def _vote_counts(items):
    _need("vote_counts", items, "list")
    return vote_counts(items)


def _list_of(value):
    return list(materialize_iterable(value))


BUILTINS: Dict[str, Builtin] = {
    b.name: b
    for b in [
        Builtin("len", _len, 1, 1),
        Builtin("append", _append, 2, 2),
        Builtin("push", _push, 2, 2),
        Builtin("keys", _keys, 1, 1),
        Builtin("values", _values, 1, 1),
        Builtin("range", _range, 1, 3),
        Builtin("str", display, 1, 1),
        Builtin("abs", _abs, 1, 1),
        Builtin("min", _min, 1, None),
        Builtin("max", _max, 1, None),
        Builtin("sorted", _sorted, 1, 1),
        Builtin("sum", _sum, 1, 1),
        Builtin("int", _int, 1, 1),
        Builtin("float", _float, 1, 1),
        Builtin("contains", _contains, 2, 2),
        Builtin("get", _get, 2, 3),
        Builtin("split", _split, 1, 2),
        Builtin("join", _join, 1, 2),
        Builtin("slice", _slice, 2, 3),
        Builtin("pop", _pop, 1, 2),
        Builtin("round", _round, 1, 2),
        Builtin("type", type_name, 1, 1),
        Builtin("list", _list_of, 1, 1),
        Builtin("vote_counts", _vote_counts, 1, 1),
    ]
}


def call_builtin(name: str, args: List[Any]) -> Any:
    return BUILTINS[name](args)
