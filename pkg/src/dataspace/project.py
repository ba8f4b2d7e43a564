"""Projects, workspaces and jobs.

On disk a project looks like this::

    <root>/signac.rc
    <root>/workspace/<id>/signac_statepoint.json
    <root>/workspace/<id>/signac_job_document.json
    <root>/workspace/<id>/...user files...

where ``<id>`` is :func:`dataspace.core.compute_id` of the state point.
"""
from __future__ import annotations

import copy
import logging
import os
from collections.abc import Mapping, MutableMapping
from pathlib import Path
from typing import Callable, Iterator, Optional, TypeVar

from .core import (
    check_statepoint,
    compute_id,
    is_job_id,
    read_document,
    write_document_atomic,
    write_text_atomic,
)
from .errors import (
    ConflictError,
    CorruptionError,
    NotAProjectError,
    UnknownIdError,
)
from .query import coerce_filter, matches, references_prefix

logger = logging.getLogger(__name__)

CONFIG_FILE = "signac.rc"
STATEPOINT_FILE = "signac_statepoint.json"
DOCUMENT_FILE = "signac_job_document.json"
RESERVED_FILES = frozenset({STATEPOINT_FILE, DOCUMENT_FILE})
DEFAULT_WORKSPACE = "workspace"

# Filter paths under this prefix address the job document.
DOC_PREFIX = "doc"

T = TypeVar("T")


def _parse_config(text: str) -> dict:
    conf = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CorruptionError(f"{CONFIG_FILE}:{lineno}: expected key=value")
        conf[key.strip()] = value.strip()
    return conf


def _read_config(root: Path) -> Optional[dict]:
    try:
        text = (root / CONFIG_FILE).read_text(encoding="utf-8")
    except (FileNotFoundError, NotADirectoryError):
        return None
    return _parse_config(text)


class StatePointView(Mapping):
    """Read-only view on a state point with attribute access (``job.sp.kT``)."""

    __slots__ = ("_data",)

    def __init__(self, data: Mapping):
        object.__setattr__(self, "_data", data)

    def _wrap(self, value):
        return StatePointView(value) if isinstance(value, Mapping) else value

    def __getitem__(self, key):
        return self._wrap(self._data[key])

    def __getattr__(self, name):
        try:
            return self._wrap(self._data[name])
        except KeyError:
            raise AttributeError(name) from None

    def __setattr__(self, name, value):
        raise AttributeError("state points are immutable")

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"StatePointView({self._data!r})"

    def to_dict(self) -> dict:
        return copy.deepcopy(dict(self._data))


class JobDocument(MutableMapping):
    """Dict-like handle on a job's JSON document file.

    Every read goes to disk and every write replaces the whole file
    atomically, so concurrent writers are last-writer-wins and a reader never
    sees a torn file. Writing initializes the job.
    """

    def __init__(self, job: "Job"):
        self._job = job

    @property
    def path(self) -> Path:
        return self._job.path / DOCUMENT_FILE

    def load(self) -> dict:
        doc = read_document(self.path)
        return {} if doc is None else doc

    def save(self, doc: Mapping) -> None:
        self._job.init()
        write_document_atomic(self.path, doc)

    def __getitem__(self, key):
        return self.load()[key]

    def __setitem__(self, key, value):
        doc = self.load()
        doc[key] = value
        self.save(doc)

    def __delitem__(self, key):
        doc = self.load()
        del doc[key]
        self.save(doc)

    def __iter__(self):
        return iter(self.load())

    def __len__(self):
        return len(self.load())

    def update(self, *args, **kwargs):
        doc = self.load()
        doc.update(*args, **kwargs)
        self.save(doc)

    def to_dict(self) -> dict:
        return self.load()

    def __repr__(self):
        return f"JobDocument({self.load()!r})"


class Job:
    """One data point: a state point plus its workspace directory.

    Handles are cheap; nothing touches the disk until :meth:`init` or a
    document write.
    """

    def __init__(self, project: "Project", statepoint: Mapping, id: Optional[str] = None):
        self._project = project
        self._sp = statepoint
        self._id = compute_id(statepoint) if id is None else id
        self._p: Optional[Path] = None
        self._cwd_stack: list[str] = []

    @property
    def id(self) -> str:
        return self._id

    @property
    def project(self) -> "Project":
        return self._project

    @property
    def statepoint(self) -> dict:
        """A deep copy of the state point."""
        return copy.deepcopy(self._sp)

    @property
    def sp(self) -> StatePointView:
        return StatePointView(self._sp)

    @property
    def _path(self) -> Path:
        # built on first use; iteration creates many jobs that never touch disk
        if self._p is None:
            self._p = self._project.workspace / self._id
        return self._p

    @property
    def path(self) -> Path:
        return self._path

    @property
    def ws(self) -> str:
        return str(self._path)

    workspace_path = path

    @property
    def document(self) -> JobDocument:
        return JobDocument(self)

    doc = document

    def exists(self) -> bool:
        return (self._path / STATEPOINT_FILE).is_file()

    def init(self) -> "Job":
        """Create the workspace directory and state point file; idempotent."""
        sp_file = self._path / STATEPOINT_FILE
        if not sp_file.is_file():
            self._path.mkdir(parents=True, exist_ok=True)
            write_document_atomic(sp_file, self._sp)
        self._project._remember(self._id, self._sp)
        return self

    def fn(self, name: str) -> str:
        """Absolute path of *name* inside the workspace directory."""
        rel = Path(name)
        if not name or rel.is_absolute() or ".." in rel.parts:
            raise ValueError(f"file name must be relative and stay inside the workspace: {name!r}")
        return str(self._path / rel)

    def isfile(self, name: str) -> bool:
        return os.path.isfile(self.fn(name))

    def move(self, project: "Project") -> "Job":
        return move_job(self, project)

    def __enter__(self):
        self.init()
        self._cwd_stack.append(os.getcwd())
        os.chdir(self._path)
        return self

    def __exit__(self, *exc):
        os.chdir(self._cwd_stack.pop())
        return False

    def __eq__(self, other):
        return isinstance(other, Job) and (self._id, self._path) == (other._id, other._path)

    def __hash__(self):
        return hash((self._id, self._path))

    def __repr__(self):
        return f"Job(id={self._id!r}, project={self._project.name!r})"

    def __str__(self):
        return self._id


class Project:
    """A named data space rooted at a directory holding ``signac.rc``.

    The handle caches parsed state points by id for its lifetime; call
    :meth:`refresh` to drop the cache.
    """

    def __init__(self, root):
        root = Path(root).resolve()
        conf = _read_config(root)
        if conf is None:
            raise NotAProjectError(f"no {CONFIG_FILE} in {root}")
        name = conf.get("project", "")
        if not name:
            raise CorruptionError(f"{root / CONFIG_FILE}: missing project name")
        self.name = name
        self.root = root
        self.workspace = root / conf.get("workspace_dir", DEFAULT_WORKSPACE)
        self._sp_cache: dict[str, dict] = {}
        self.unreadable: dict[str, str] = {}

    def __repr__(self):
        return f"Project(name={self.name!r}, root={str(self.root)!r})"

    def _remember(self, jid: str, sp: dict) -> None:
        self._sp_cache[jid] = sp

    def refresh(self) -> None:
        self._sp_cache.clear()

    def open_job(self, statepoint: Mapping) -> Job:
        check_statepoint(statepoint)
        sp = copy.deepcopy(dict(statepoint))
        return Job(self, sp)

    def _load_statepoint(self, jid: str) -> dict:
        path = self.workspace / jid / STATEPOINT_FILE
        try:
            sp = read_document(path)
        except NotADirectoryError:
            sp = None
        if sp is None:
            raise UnknownIdError(f"no job with id {jid!r} in {self.workspace}")
        actual = compute_id(sp)
        if actual != jid:
            raise CorruptionError(f"{path}: state point hashes to {actual}, not {jid}")
        return sp

    def open_job_by_id(self, jid: str) -> Job:
        """Load a job's state point from disk and verify it against *jid*."""
        if not is_job_id(jid):
            raise UnknownIdError(f"not a job id: {jid!r}")
        sp = self._load_statepoint(jid)
        self._sp_cache[jid] = sp
        return Job(self, sp, jid)

    def _scan(self) -> list[str]:
        try:
            names = os.listdir(self.workspace)
        except FileNotFoundError:
            return []
        cache = self._sp_cache
        unreadable = {}
        ids = []
        for jid in sorted(names):
            if jid in cache:
                ids.append(jid)
                continue
            if not is_job_id(jid):
                continue
            try:
                cache[jid] = self._load_statepoint(jid)
            except UnknownIdError:
                continue
            except CorruptionError as exc:
                unreadable[jid] = str(exc)
                logger.warning("skipping unreadable job %s: %s", jid, exc)
                continue
            ids.append(jid)
        self.unreadable = unreadable
        return ids

    def iterate_jobs(self) -> Iterator[Job]:
        """Yield every initialized job once, in ascending id order."""
        cache = self._sp_cache
        for jid in self._scan():
            yield Job(self, cache[jid], jid)

    __iter__ = iterate_jobs

    def num_jobs(self) -> int:
        return len(self._scan())

    __len__ = num_jobs

    def __contains__(self, job) -> bool:
        jid = job.id if isinstance(job, Job) else job
        return is_job_id(jid) and (self.workspace / jid / STATEPOINT_FILE).is_file()

    def find_jobs(self, filter=None) -> list[Job]:
        """Jobs whose state point matches *filter*, in ascending id order.

        Paths starting with ``doc.`` are evaluated against the job document.
        The filter is parsed before any file is read.
        """
        expr = coerce_filter(filter)
        if expr is None:
            return list(self.iterate_jobs())
        with_doc = references_prefix(expr, DOC_PREFIX)
        out = []
        for job in self.iterate_jobs():
            target = filter_target(job._sp, job.document.load()) if with_doc else job._sp
            if matches(expr, target):
                out.append(job)
        return out

    def fsck(self) -> list[tuple[str, str]]:
        """Check every workspace entry; return ``(name, problem)`` pairs.

        An empty list means every directory name equals the id of the state
        point stored inside it.
        """
        problems = []
        try:
            names = sorted(os.listdir(self.workspace))
        except FileNotFoundError:
            return problems
        for name in names:
            entry = self.workspace / name
            if not is_job_id(name):
                problems.append((name, "foreign entry (not a job id)"))
                continue
            if not entry.is_dir():
                problems.append((name, "not a directory"))
                continue
            try:
                sp = read_document(entry / STATEPOINT_FILE)
            except CorruptionError as exc:
                problems.append((name, f"corrupt state point: {exc}"))
                continue
            if sp is None:
                problems.append((name, "missing state point file"))
                continue
            actual = compute_id(sp)
            if actual != name:
                problems.append((name, f"id mismatch: state point hashes to {actual}"))
        return problems


def filter_target(statepoint: Mapping, document: Mapping) -> dict:
    """The mapping a filter sees for one job: the state point plus ``doc``."""
    target = dict(statepoint)
    target[DOC_PREFIX] = document
    return target


def init_project(name: str, root=None) -> Project:
    """Create (or reopen) the project *name* rooted at *root* (default: cwd)."""
    if not name or any(c in name for c in "\r\n=") or name != name.strip():
        raise ValueError(f"invalid project name: {name!r}")
    root = Path(os.getcwd() if root is None else root).resolve()
    conf = _read_config(root)
    if conf is not None:
        existing = conf.get("project")
        if existing != name:
            raise ConflictError(f"{root} is already initialized as project {existing!r}")
        return Project(root)
    root.mkdir(parents=True, exist_ok=True)
    write_text_atomic(
        root / CONFIG_FILE,
        f"project={name}\nworkspace_dir={DEFAULT_WORKSPACE}\n",
    )
    return Project(root)


def find_project_root(cwd=None) -> Path:
    start = Path(os.getcwd() if cwd is None else cwd).resolve()
    for d in (start, *start.parents):
        if (d / CONFIG_FILE).is_file():
            return d
    raise NotAProjectError(f"{start} is not inside a project (no {CONFIG_FILE} found)")


def get_project(cwd=None) -> Project:
    """The project whose root is the nearest ancestor of *cwd* (inclusive)."""
    return Project(find_project_root(cwd))


def with_job_dir(job: Job, action: Callable[[], T]) -> T:
    """Run *action* with the job's workspace as working directory."""
    with job:
        return action()


def move_job(job: Job, destination: Project) -> Job:
    """Relocate *job*'s directory into *destination*'s workspace.

    The id is unchanged. An existing job with the same id at the destination
    raises :class:`ConflictError` and nothing is moved.
    """
    src = job.path
    if not (src / STATEPOINT_FILE).is_file():
        raise UnknownIdError(f"job {job.id} is not initialized in {job.project.workspace}")
    dst = destination.workspace / job.id
    if dst.exists():
        raise ConflictError(f"{destination.name} already has a job with id {job.id}")
    destination.workspace.mkdir(parents=True, exist_ok=True)
    os.rename(src, dst)
    job.project._sp_cache.pop(job.id, None)
    moved = Job(destination, job._sp, job.id)
    destination._remember(job.id, job._sp)
    return moved
