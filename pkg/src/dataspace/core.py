"""State point validation, canonical serialization, job ids and atomic JSON storage.

A state point is a JSON-compatible mapping. Its id is the first 128 bits of the
SHA-256 digest of the canonical serialization, hex encoded::

    >>> compute_id({"b": 1, "a": 2}) == compute_id({"a": 2, "b": 1})
    True

Integers and floats are distinct values here: ``{"a": 1}`` and ``{"a": 1.0}``
have different ids.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import tempfile
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import CorruptionError, StatePointError

__all__ = [
    "ID_LENGTH",
    "validate_statepoint",
    "check_statepoint",
    "canonicalize",
    "compute_id",
    "is_job_id",
    "write_text_atomic",
    "write_document_atomic",
    "read_document",
    "dump_json",
]

ID_LENGTH = 32
_ID_RE = re.compile(r"[0-9a-f]{32}")

# Arrays may arrive as tuples from Python callers; they serialize like lists.
_ARRAY_TYPES = (list, tuple)


def _walk_violations(value, path, out, seen):
    if value is None or isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            out.append((path, f"non-finite float {value!r}"))
        return
    if isinstance(value, (Mapping, *_ARRAY_TYPES)):
        if id(value) in seen:
            out.append((path, "cyclic reference"))
            return
        seen.add(id(value))
        if isinstance(value, Mapping):
            for key, sub in value.items():
                if not isinstance(key, str):
                    out.append((path, f"non-string key {key!r}"))
                    continue
                subpath = f"{path}.{key}" if path else key
                if not key:
                    out.append((subpath, "empty key"))
                elif "." in key:
                    out.append((subpath, "key contains '.'"))
                _walk_violations(sub, subpath, out, seen)
        else:
            for i, sub in enumerate(value):
                _walk_violations(sub, f"{path}[{i}]", out, seen)
        seen.discard(id(value))
        return
    out.append((path, f"unsupported type {type(value).__name__}"))


def validate_statepoint(sp) -> list[tuple[str, str]]:
    """Return every invariant violation in *sp* as ``(key_path, reason)`` pairs.

    An empty list means the state point is valid. The same rules apply to job
    documents.
    """
    if not isinstance(sp, Mapping):
        return [("", f"expected a mapping, got {type(sp).__name__}")]
    out: list[tuple[str, str]] = []
    _walk_violations(sp, "", out, set())
    return out


def check_statepoint(sp) -> None:
    """Raise :class:`StatePointError` unless *sp* is valid."""
    violations = validate_statepoint(sp)
    if violations:
        raise StatePointError(violations)


def _emit(value, parts: list[str]) -> None:
    if value is None:
        parts.append("null")
    elif value is True:
        parts.append("true")
    elif value is False:
        parts.append("false")
    elif isinstance(value, int):
        parts.append(int.__repr__(value))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise StatePointError([("", f"non-finite float {value!r}")])
        # repr is the shortest string that round-trips to the same binary64.
        parts.append(float.__repr__(value))
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, Mapping):
        parts.append("{")
        first = True
        for key in sorted(value):
            if not first:
                parts.append(",")
            first = False
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _emit(value[key], parts)
        parts.append("}")
    elif isinstance(value, _ARRAY_TYPES):
        parts.append("[")
        for i, sub in enumerate(value):
            if i:
                parts.append(",")
            _emit(sub, parts)
        parts.append("]")
    else:
        raise StatePointError([("", f"unsupported type {type(value).__name__}")])


def canonicalize(sp) -> bytes:
    """Serialize *sp* to canonical UTF-8 JSON bytes.

    Keys are sorted by code point at every level and no whitespace is emitted.
    NaN and infinities raise :class:`StatePointError`.
    """
    check_statepoint(sp)
    parts: list[str] = []
    _emit(sp, parts)
    return "".join(parts).encode("utf-8")


def compute_id(sp) -> str:
    """Return the 32-character hex job id of *sp*."""
    return hashlib.sha256(canonicalize(sp)).hexdigest()[:ID_LENGTH]


def is_job_id(value) -> bool:
    return isinstance(value, str) and _ID_RE.fullmatch(value) is not None


def dump_json(doc) -> str:
    """Human-readable on-disk rendering used for all metadata files."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write_text_atomic(
    path,
    text: str,
    *,
    fsync: bool = True,
    fault_hook: Optional[Callable[[Path], None]] = None,
) -> None:
    """Replace the file at *path* with *text* in a single atomic step.

    The content goes to a uniquely named temporary sibling which is renamed
    over the target, so readers see either the old or the new file and never
    a partial one. No lock files are involved. ``fault_hook`` is called with
    the temporary path right before the rename; tests use it to simulate a
    crash.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            if fsync:
                os.fsync(fh.fileno())
        if fault_hook is not None:
            fault_hook(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_document_atomic(path, doc: Mapping[str, Any], **kwargs) -> None:
    """Validate *doc* and write it as pretty JSON via :func:`write_text_atomic`."""
    check_statepoint(doc)
    write_text_atomic(path, dump_json(doc), **kwargs)


def _reject_constant(name):
    raise ValueError(f"non-standard JSON constant {name}")


def read_document(path) -> Optional[dict]:
    """Load the JSON mapping at *path*; ``None`` if the file does not exist.

    A file that exists but does not hold a JSON object raises
    :class:`CorruptionError`.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        return None
    try:
        doc = json.loads(raw.decode("utf-8"), parse_constant=_reject_constant)
    except (UnicodeDecodeError, ValueError) as exc:
        raise CorruptionError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CorruptionError(f"{path}: expected a JSON object, got {type(doc).__name__}")
    return doc
