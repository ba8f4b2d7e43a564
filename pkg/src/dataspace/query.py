"""A MongoDB-style filter language over JSON-like mappings.

Filters are parsed into a small immutable expression tree::

    >>> parse_filter({"p.$gt": 1.0})
    Cmp(path='p', op='gt', operand=1.0)
    >>> matches(parse_filter({"p.$gt": 1.0}), {"p": 10.0})
    True

Supported operators are ``$eq $ne $gt $gte $lt $lte $in $nin $exists`` on
fields and ``$and $or $not`` for composition. Paths use ``.`` to descend into
nested mappings; arrays are never indexed.

Numeric equality bridges int and float (``1`` matches ``1.0``), booleans are
never numbers, and ordering comparisons between mismatched types are simply
false.
"""
from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Union

from .errors import FilterParseError

__all__ = [
    "MISSING",
    "Cmp",
    "And",
    "Or",
    "Not",
    "FilterExpr",
    "parse_filter",
    "parse_cli_tokens",
    "format_filter",
    "lookup_path",
    "matches",
    "references_prefix",
]

COMPARISON_OPS = ("eq", "ne", "gt", "gte", "lt", "lte", "in", "nin", "exists")
ORDERING_OPS = frozenset({"gt", "gte", "lt", "lte"})
LOGICAL_OPS = ("and", "or", "not")


class _Missing:
    __slots__ = ()

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False


MISSING: Any = _Missing()


@dataclass(frozen=True)
class Cmp:
    path: str
    op: str
    operand: Any


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    child: Any


FilterExpr = Union[Cmp, And, Or, Not]


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_scalar(x) -> bool:
    return not isinstance(x, (Mapping, list, tuple))


def _check_path(path: str, where: str) -> None:
    if not isinstance(path, str) or not path:
        raise FilterParseError(f"{where}: empty field path")
    for seg in path.split("."):
        if not seg:
            raise FilterParseError(f"{where}: empty segment in path {path!r}")
        if seg.startswith("$"):
            raise FilterParseError(f"{where}: operator {seg!r} not allowed inside a path")


def _make_cmp(path: str, op: str, operand, where: str) -> Cmp:
    if op not in COMPARISON_OPS:
        raise FilterParseError(f"{where}: unknown operator ${op}")
    if op in ("in", "nin"):
        if not isinstance(operand, (list, tuple)):
            raise FilterParseError(f"{where}: ${op} expects an array operand")
        operand = list(operand)
    elif op == "exists":
        if not isinstance(operand, bool):
            raise FilterParseError(f"{where}: $exists expects a boolean operand")
    elif op in ORDERING_OPS:
        if not _is_scalar(operand):
            raise FilterParseError(f"{where}: ${op} expects a scalar operand")
    return Cmp(path, op, operand)


def _combine(nodes: list, cls=And):
    return nodes[0] if len(nodes) == 1 else cls(tuple(nodes))


def _parse_operator_doc(path: str, ops: Mapping, where: str):
    nodes = []
    for key, operand in ops.items():
        op = key[1:]
        here = f"{where}.{key}"
        if op == "not":
            if not isinstance(operand, Mapping) or not operand:
                raise FilterParseError(f"{here}: $not expects a non-empty operator document")
            if not all(isinstance(k, str) and k.startswith("$") for k in operand):
                raise FilterParseError(f"{here}: $not expects operator keys")
            nodes.append(Not(_parse_operator_doc(path, operand, here)))
        else:
            nodes.append(_make_cmp(path, op, operand, here))
    return _combine(nodes)


def _parse_field(key: str, value, where: str):
    path, op = key, None
    head, sep, tail = key.rpartition(".")
    if sep and tail.startswith("$"):
        path, op = head, tail[1:]
    _check_path(path, where)
    if op is not None:
        if op == "not":
            if not isinstance(value, Mapping):
                raise FilterParseError(f"{where}: $not expects an operator document")
            return Not(_parse_operator_doc(path, value, where))
        return _make_cmp(path, op, value, where)
    if isinstance(value, Mapping) and value:
        dollar = [isinstance(k, str) and k.startswith("$") for k in value]
        if all(dollar):
            return _parse_operator_doc(path, value, where)
        if any(dollar):
            raise FilterParseError(f"{where}: cannot mix operators and plain keys")
    return Cmp(path, "eq", value)


def _parse(doc, where: str):
    if not isinstance(doc, Mapping):
        raise FilterParseError(f"{where}: expected a filter document, got {type(doc).__name__}")
    nodes = []
    for key, value in doc.items():
        if not isinstance(key, str):
            raise FilterParseError(f"{where}: non-string key {key!r}")
        here = f"{where}.{key}" if where else key
        if key.startswith("$"):
            op = key[1:]
            if op in ("and", "or"):
                if not isinstance(value, (list, tuple)) or not value:
                    raise FilterParseError(f"{here}: ${op} expects a non-empty array")
                children = [_parse(sub, f"{here}[{i}]") for i, sub in enumerate(value)]
                # Drop empty sub-filters; they match everything.
                kids = [c for c in children if c is not None]
                if op == "and":
                    nodes.append(And(tuple(kids)) if kids else None)
                elif len(kids) < len(children):
                    nodes.append(None)
                else:
                    nodes.append(Or(tuple(kids)))
            elif op == "not":
                child = _parse(value, here)
                if child is None:
                    raise FilterParseError(f"{here}: $not of an empty filter")
                nodes.append(Not(child))
            else:
                raise FilterParseError(f"{here}: unknown operator {key}")
        else:
            nodes.append(_parse_field(key, value, here))
    nodes = [n for n in nodes if n is not None]
    if not nodes:
        return None
    return _combine(nodes)


def parse_filter(doc) -> Optional[FilterExpr]:
    """Parse a filter document into an expression.

    Returns ``None`` for an empty document, which matches everything.
    Raises :class:`FilterParseError` naming the offending path otherwise.
    """
    return _parse(doc, "")


def _parse_cli_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_cli_tokens(tokens: Iterable[str]) -> Optional[FilterExpr]:
    """Parse ``path[.$op] value`` token pairs as typed on a command line.

    A single token holding a JSON object is treated as a filter document.
    Values are decoded as JSON when possible and kept as strings otherwise.
    """
    tokens = list(tokens)
    if not tokens:
        return None
    if len(tokens) == 1:
        try:
            doc = json.loads(tokens[0])
        except ValueError:
            doc = None
        if isinstance(doc, Mapping):
            return parse_filter(doc)
    if len(tokens) % 2:
        raise FilterParseError(
            f"expected path/value pairs or a single JSON filter, got {len(tokens)} tokens"
        )
    nodes = []
    for i in range(0, len(tokens), 2):
        key, value = tokens[i], _parse_cli_value(tokens[i + 1])
        nodes.append(_parse_field(key, value, key))
    return _combine(nodes)


def format_filter(expr: Optional[FilterExpr]) -> dict:
    """Print *expr* as a canonical filter document that parses back to it."""
    if expr is None:
        return {}
    if isinstance(expr, Cmp):
        return {expr.path: {f"${expr.op}": expr.operand}}
    if isinstance(expr, And):
        return {"$and": [format_filter(c) for c in expr.children]}
    if isinstance(expr, Or):
        return {"$or": [format_filter(c) for c in expr.children]}
    if isinstance(expr, Not):
        return {"$not": format_filter(expr.child)}
    raise TypeError(f"not a filter expression: {expr!r}")


def lookup_path(doc, path: str):
    """Descend *doc* along the dotted *path*; :data:`MISSING` on any miss."""
    cur = doc
    for seg in path.split("."):
        if not isinstance(cur, Mapping):
            return MISSING
        try:
            cur = cur[seg]
        except KeyError:
            return MISSING
    return cur


def values_equal(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if _is_number(a) and _is_number(b):
        return a == b
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        if len(a) != len(b):
            return False
        for k, v in a.items():
            if k not in b or not values_equal(v, b[k]):
                return False
        return True
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _ordered(op: str, value, operand) -> bool:
    if _is_number(value) and _is_number(operand):
        pass
    elif isinstance(value, str) and isinstance(operand, str):
        pass
    else:
        return False
    if op == "gt":
        return value > operand
    if op == "gte":
        return value >= operand
    if op == "lt":
        return value < operand
    return value <= operand


def _match_cmp(expr: Cmp, doc) -> bool:
    value = lookup_path(doc, expr.path)
    op = expr.op
    if op == "exists":
        return (value is not MISSING) == expr.operand
    if value is MISSING:
        return op in ("ne", "nin")
    if op == "eq":
        return values_equal(value, expr.operand)
    if op == "ne":
        return not values_equal(value, expr.operand)
    if op == "in":
        return any(values_equal(value, x) for x in expr.operand)
    if op == "nin":
        return not any(values_equal(value, x) for x in expr.operand)
    return _ordered(op, value, expr.operand)


def matches(expr: Optional[FilterExpr], doc) -> bool:
    """Evaluate *expr* against the mapping *doc*. ``None`` matches everything."""
    if expr is None:
        return True
    if isinstance(expr, Cmp):
        return _match_cmp(expr, doc)
    if isinstance(expr, And):
        return all(matches(c, doc) for c in expr.children)
    if isinstance(expr, Or):
        return any(matches(c, doc) for c in expr.children)
    if isinstance(expr, Not):
        return not matches(expr.child, doc)
    raise TypeError(f"not a filter expression: {expr!r}")


def references_prefix(expr: Optional[FilterExpr], prefix: str) -> bool:
    """True if any path in *expr* is *prefix* or starts with ``prefix.``."""
    if expr is None:
        return False
    if isinstance(expr, Cmp):
        return expr.path == prefix or expr.path.startswith(prefix + ".")
    if isinstance(expr, (And, Or)):
        return any(references_prefix(c, prefix) for c in expr.children)
    return references_prefix(expr.child, prefix)


def coerce_filter(filter) -> Optional[FilterExpr]:
    """Accept a filter document, an expression or ``None``."""
    if filter is None or isinstance(filter, (Cmp, And, Or, Not)):
        return filter
    return parse_filter(filter)
