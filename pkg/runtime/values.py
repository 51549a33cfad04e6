# runtime/values.py
"""Value model: null, bool, 64-bit int, float, str, list, map and function refs.

Lists and maps are plain Python lists and dicts (mutable reference cells);
everything else is immutable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from runtime.errors import PanRuntimeError

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


class _NoValue:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_VALUE"

    def __bool__(self) -> bool:
        return False

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self


NO_VALUE = _NoValue()


@dataclass(frozen=True)
class FnRef:
    name: str


def type_name(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "str"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "map"
    if isinstance(value, FnRef):
        return "fn"
    return type(value).__name__


def is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def check_int(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise PanRuntimeError("OverflowError", f"integer {value} does not fit in 64 bits")
    return value


def truthy(value: Any) -> bool:
    if value is None or value is False:
        return False
    if isinstance(value, bool):
        return True
    if is_number(value):
        return value != 0
    if isinstance(value, (str, list, dict)):
        return len(value) > 0
    return True


def values_equal(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if is_number(a) and is_number(b):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    if type(a) is not type(b):
        return False
    return a == b


def compare_values(op: str, a: Any, b: Any) -> bool:
    comparable = (is_number(a) and is_number(b)) or (isinstance(a, str) and isinstance(b, str))
    if not comparable:
        raise PanRuntimeError("TypeError", f"cannot order {type_name(a)} and {type_name(b)}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _arith(op: str, a: Any, b: Any) -> Any:
    if op == "+":
        if isinstance(a, str) and isinstance(b, str):
            return a + b
        if isinstance(a, list) and isinstance(b, list):
            return a + b
    if not (is_number(a) and is_number(b)):
        raise PanRuntimeError("TypeError", f"unsupported operand types for {op}: {type_name(a)} and {type_name(b)}")
    if op == "/":
        if b == 0:
            raise PanRuntimeError("DivZero", "division by zero")
        return a / b
    if op == "%":
        if not (isinstance(a, int) and isinstance(b, int)):
            raise PanRuntimeError("TypeError", "% needs integer operands")
        if b == 0:
            raise PanRuntimeError("DivZero", "modulo by zero")
        return a % b
    if op == "+":
        result = a + b
    elif op == "-":
        result = a - b
    else:
        result = a * b
    if isinstance(result, int):
        return check_int(result)
    return result


def apply_binop(op: str, a: Any, b: Any) -> Any:
    if op in ("+", "-", "*", "/", "%"):
        return _arith(op, a, b)
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    if op in ("<", "<=", ">", ">="):
        return compare_values(op, a, b)
    if op == "&&":
        return truthy(a) and truthy(b)
    if op == "||":
        return truthy(a) or truthy(b)
    raise PanRuntimeError("TypeError", f"unknown operator {op}")


def apply_unop(op: str, value: Any) -> Any:
    if op == "!":
        return not truthy(value)
    if not is_number(value):
        raise PanRuntimeError("TypeError", f"bad operand type for unary -: {type_name(value)}")
    result = -value
    return check_int(result) if isinstance(result, int) else result


def _list_position(items: list, index: Any) -> int:
    if not isinstance(index, int) or isinstance(index, bool):
        raise PanRuntimeError("TypeError", f"list index must be int, not {type_name(index)}")
    position = index + len(items) if index < 0 else index
    if not 0 <= position < len(items):
        raise PanRuntimeError("IndexError", f"index {index} out of range for list of length {len(items)}")
    return position


def index_get(container: Any, index: Any) -> Any:
    if isinstance(container, list):
        return container[_list_position(container, index)]
    if isinstance(container, dict):
        if not isinstance(index, str):
            raise PanRuntimeError("TypeError", f"map key must be str, not {type_name(index)}")
        if index not in container:
            raise PanRuntimeError("KeyError", f"key {index!r} not found")
        return container[index]
    if isinstance(container, str):
        return container[_list_position(list(container), index)]
    raise PanRuntimeError("TypeError", f"{type_name(container)} is not indexable")


def index_set(container: Any, index: Any, value: Any) -> None:
    if isinstance(container, list):
        container[_list_position(container, index)] = value
    elif isinstance(container, dict):
        if not isinstance(index, str):
            raise PanRuntimeError("TypeError", f"map key must be str, not {type_name(index)}")
        container[index] = value
    else:
        raise PanRuntimeError("TypeError", f"{type_name(container)} does not support item assignment")


def materialize_iterable(value: Any) -> Tuple[Any, ...]:
    """Snapshot of the elements a for loop or choose walks over."""
    if isinstance(value, list):
        return tuple(value)
    if isinstance(value, dict):
        return tuple(value.keys())
    if isinstance(value, str):
        return tuple(value)
    raise PanRuntimeError("NotIterable", f"{type_name(value)} is not iterable")


def clone_value(value: Any, memo: Dict[int, Any]) -> Any:
    """Deep copy of lists and maps; shared sub-structure stays shared through `memo`."""
    if not isinstance(value, (list, dict)):
        return value
    key = id(value)
    if key in memo:
        return memo[key]
    if isinstance(value, list):
        copy: Any = []
        memo[key] = copy
        copy.extend(clone_value(item, memo) for item in value)
    else:
        copy = {}
        memo[key] = copy
        for k, v in value.items():
            copy[k] = clone_value(v, memo)
    return copy


def to_json(value: Any) -> Any:
    if isinstance(value, FnRef):
        return {"$fn": value.name}
    if isinstance(value, list):
        return [to_json(v) for v in value]
    if isinstance(value, tuple):
        return [to_json(v) for v in value]
    if isinstance(value, dict):
        return {k: to_json(v) for k, v in value.items()}
    if value is NO_VALUE:
        return None
    return value


def dumps(value: Any) -> str:
    return json.dumps(to_json(value), ensure_ascii=False)


def display(value: Any) -> str:
    """String conversion used by the `str` builtin."""
    if isinstance(value, str):
        return value
    return dumps(value)


def from_json(data: Any) -> Any:
    """Map decoded JSON into the value model; int and float stay distinct."""
    if isinstance(data, dict):
        if set(data) == {"$fn"} and isinstance(data["$fn"], str):
            return FnRef(data["$fn"])
        return {str(k): from_json(v) for k, v in data.items()}
    if isinstance(data, list):
        return [from_json(v) for v in data]
    if isinstance(data, int) and not isinstance(data, bool):
        return check_int(data)
    return data


def vote_counts(items: List[Any]) -> List[int]:
    """For each item, how many items in the list are structurally equal to it."""
    return [sum(1 for other in items if values_equal(item, other)) for item in items]
