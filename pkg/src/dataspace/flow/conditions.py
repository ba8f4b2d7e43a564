"""Job conditions used as operation pre/post requirements.

Every condition is total: a predicate that raises or looks at missing data
evaluates to ``False``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Callable

from ..query import MISSING, lookup_path, values_equal

logger = logging.getLogger(__name__)

_registry: dict[str, "Condition"] = {}


@dataclass(frozen=True)
class Condition:
    name: str
    predicate: Callable[[Any], bool]

    def __call__(self, job) -> bool:
        try:
            return bool(self.predicate(job))
        except Exception as exc:
            logger.debug("condition %s is false for %s: %s", self.name, job, exc)
            return False


def _doc_value(job, key):
    return lookup_path(job.document.load(), key)


def file_exists(name: str) -> Condition:
    return Condition(f"file_exists:{name}", lambda job: job.isfile(name))


def doc_key_exists(key: str) -> Condition:
    return Condition(f"doc_key_exists:{key}", lambda job: _doc_value(job, key) is not MISSING)


def doc_gte(key: str, number) -> Condition:
    def pred(job):
        v = _doc_value(job, key)
        return isinstance(v, (int, float)) and not isinstance(v, bool) and v >= number

    return Condition(f"doc_gte:{key}:{number}", pred)


def doc_eq(key: str, value) -> Condition:
    def pred(job):
        v = _doc_value(job, key)
        return v is not MISSING and values_equal(v, value)

    return Condition(f"doc_eq:{key}:{json.dumps(value, sort_keys=True)}", pred)


always = Condition("always", lambda job: True)
never = Condition("never", lambda job: False)


def register_condition(name: str, predicate: Callable[[Any], bool]) -> Condition:
    """Make a user predicate available to :func:`parse_condition` by *name*."""
    if ":" in name or name in ("always", "never"):
        raise ValueError(f"reserved condition name: {name!r}")
    cond = Condition(name, predicate)
    _registry[name] = cond
    return cond


def unregister_condition(name: str) -> None:
    _registry.pop(name, None)


def parse_condition(spec: str) -> Condition:
    """Build a condition from its textual form.

    Accepted forms are ``file_exists:NAME``, ``doc_key_exists:KEY``,
    ``doc_gte:KEY:NUMBER``, ``doc_eq:KEY:JSON``, ``always``, ``never`` and
    names registered with :func:`register_condition`.
    """
    if not isinstance(spec, str):
        raise ValueError(f"condition spec must be a string, got {spec!r}")
    kind, _, rest = spec.partition(":")
    if kind == "file_exists" and rest:
        return file_exists(rest)
    if kind == "doc_key_exists" and rest:
        return doc_key_exists(rest)
    if kind == "doc_gte":
        key, sep, num = rest.partition(":")
        try:
            number = json.loads(num)
        except ValueError:
            number = None
        if not key or not sep or isinstance(number, bool) or not isinstance(number, (int, float)):
            raise ValueError(f"expected doc_gte:KEY:NUMBER, got {spec!r}")
        return doc_gte(key, number)
    if kind == "doc_eq":
        key, sep, raw = rest.partition(":")
        if not key or not sep:
            raise ValueError(f"expected doc_eq:KEY:JSON, got {spec!r}")
        try:
            value = json.loads(raw)
        except ValueError as exc:
            raise ValueError(f"invalid JSON in {spec!r}: {exc}") from None
        return doc_eq(key, value)
    if spec == "always":
        return always
    if spec == "never":
        return never
    if spec in _registry:
        return _registry[spec]
    raise ValueError(f"unknown condition {spec!r}")
