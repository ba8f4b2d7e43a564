"""Index records for workspaces, deep-indexing rules and export sinks."""
from __future__ import annotations

import fnmatch
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

from .core import compute_id, is_job_id, read_document
from .errors import CorruptionError, ExportError, StaleIndexError
from .project import DOCUMENT_FILE, RESERVED_FILES, STATEPOINT_FILE, Project, filter_target
from .query import coerce_filter, matches

logger = logging.getLogger(__name__)

DEFAULT_FORMAT = "File"
DERIVED_KEY = "derived"


@dataclass
class FormatRule:
    """Label files matching ``pattern``; optionally extract metadata from them.

    ``extractor`` receives the file path and returns a mapping which is merged
    into ``document["derived"]`` of the record.
    """

    pattern: str
    format: str
    extractor: Optional[Callable[[Path], dict]] = None

    def match(self, name: str) -> bool:
        return fnmatch.fnmatchcase(name, self.pattern) or fnmatch.fnmatchcase(
            name.rsplit("/", 1)[-1], self.pattern
        )


@dataclass
class IndexRecord:
    id: str
    statepoint: dict
    root: str
    files: list = field(default_factory=list)
    document: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "_id": self.id,
            "statepoint": self.statepoint,
            "root": self.root,
            "files": self.files,
            "document": self.document,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IndexRecord":
        return cls(doc["_id"], doc["statepoint"], doc["root"], doc["files"], doc["document"])


def _list_files(root: Path) -> list[str]:
    names = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        rel = os.path.relpath(dirpath, root)
        for fn in filenames:
            name = fn if rel == "." else f"{rel}/{fn}".replace(os.sep, "/")
            if rel == "." and fn in RESERVED_FILES:
                continue
            if os.path.isfile(os.path.join(dirpath, fn)):
                names.append(name)
    return sorted(names)


class WorkspaceCrawler:
    """Crawl any directory laid out as ``<id>/signac_statepoint.json``."""

    def __init__(self, rules: Sequence[FormatRule] = ()):
        self.rules = list(rules)

    def _describe(self, path: Path, name: str, derived: dict) -> dict:
        entry = {"name": name, "size": path.stat().st_size, "format": DEFAULT_FORMAT}
        for rule in self.rules:
            if rule.match(name):
                entry["format"] = rule.format
                if rule.extractor is not None:
                    try:
                        derived.update(rule.extractor(path))
                    except Exception as exc:
                        entry["error"] = f"{type(exc).__name__}: {exc}"
                        logger.warning("extractor for %s failed on %s: %s", rule.pattern, path, exc)
                break
        return entry

    def crawl_job(self, jobdir: Path) -> Optional[IndexRecord]:
        jid = jobdir.name
        try:
            sp = read_document(jobdir / STATEPOINT_FILE)
        except (CorruptionError, NotADirectoryError) as exc:
            logger.warning("skipping %s: %s", jobdir, exc)
            return None
        if sp is None:
            return None
        if compute_id(sp) != jid:
            logger.warning("skipping %s: state point does not hash to directory name", jobdir)
            return None
        try:
            document = read_document(jobdir / DOCUMENT_FILE) or {}
        except CorruptionError as exc:
            logger.warning("unreadable document in %s: %s", jobdir, exc)
            document = {}
        derived: dict = {}
        files = []
        for name in _list_files(jobdir):
            try:
                files.append(self._describe(jobdir / name, name, derived))
            except FileNotFoundError:
                continue
        if derived:
            document[DERIVED_KEY] = derived
        return IndexRecord(jid, sp, str(jobdir), files, document)

    def crawl(self, root) -> Iterator[IndexRecord]:
        root = Path(root)
        try:
            names = sorted(os.listdir(root))
        except FileNotFoundError:
            return
        for name in names:
            if not is_job_id(name):
                continue
            rec = self.crawl_job(root / name)
            if rec is not None:
                yield rec


def crawl_workspace(project: Project, rules: Sequence[FormatRule] = ()) -> Iterator[IndexRecord]:
    """One record per initialized job of *project*, ascending by id. Read-only."""
    return WorkspaceCrawler(rules).crawl(project.workspace)


def fetch(record: IndexRecord, name: str) -> str:
    """Absolute path of the indexed file *name*; fails if it vanished."""
    if not any(f["name"] == name for f in record.files):
        raise KeyError(f"{name!r} is not listed in the index record for {record.id}")
    path = os.path.join(record.root, name)
    if not os.path.isfile(path):
        raise StaleIndexError(f"{path} no longer exists; re-crawl the workspace")
    return path


class ExportSink:
    def write(self, record: IndexRecord) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass


def record_line(record: IndexRecord) -> str:
    return json.dumps(record.to_json(), sort_keys=True, ensure_ascii=False, allow_nan=False)


class NDJSONSink(ExportSink):
    """Write one JSON object per line to a path or an open text stream."""

    def __init__(self, target):
        if isinstance(target, (str, os.PathLike)):
            self._fh = open(target, "w", encoding="utf-8", newline="\n")
            self._owned = True
        else:
            self._fh = target
            self._owned = False

    def write(self, record):
        self._fh.write(record_line(record))
        self._fh.write("\n")

    def flush(self):
        self._fh.flush()
        if self._owned:
            os.fsync(self._fh.fileno())

    def close(self):
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MemorySink(ExportSink):
    """Collects exported records as plain JSON dicts."""

    def __init__(self):
        self.records: list[dict] = []
        self._pending: list[dict] = []

    def write(self, record):
        self._pending.append(json.loads(record_line(record)))

    def flush(self):
        self.records.extend(self._pending)
        self._pending.clear()


def export(records: Iterable[IndexRecord], sink: ExportSink) -> int:
    """Write every record to *sink*, flush it, and return the count."""
    count = 0
    try:
        for rec in records:
            sink.write(rec)
            count += 1
        sink.flush()
    except Exception as exc:
        raise ExportError(f"export failed after {count} records: {exc}", count) from exc
    return count


def load_ndjson(source) -> list[dict]:
    """Parse NDJSON from a path or text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return load_ndjson(fh)
    return [json.loads(line) for line in source if line.strip()]


def search_records(records: Iterable[Any], filter=None) -> list[str]:
    """Ids of exported records matching *filter*, evaluated like ``find_jobs``."""
    expr = coerce_filter(filter)
    out = []
    for rec in records:
        if isinstance(rec, IndexRecord):
            rec = rec.to_json()
        if matches(expr, filter_target(rec["statepoint"], rec["document"])):
            out.append(rec["_id"])
    return sorted(out)
