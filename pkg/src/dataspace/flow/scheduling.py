"""Cluster script generation and scheduler adapters.

Dialects are plain directive tables; adding a scheduler flavour means adding
a :class:`Dialect`, not touching the engine.
"""
from __future__ import annotations

import enum
import hashlib
import os
import shlex
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from ..core import read_document, write_document_atomic
from ..errors import SchedulerError


class SchedulerStatus(str, enum.Enum):
    unknown = "unknown"
    queued = "queued"
    active = "active"
    completed = "completed"
    failed = "failed"


@dataclass(frozen=True)
class JobOperation:
    """One operation bound to one job: the unit of execution and submission."""

    job_id: str
    op_name: str
    cmd: str = ""
    cwd: str = ""

    @property
    def jo_id(self) -> str:
        return f"{self.job_id}-{self.op_name}"


@dataclass(frozen=True)
class Bundle:
    members: tuple
    mode: str = "serial"

    def __post_init__(self):
        if not self.members:
            raise ValueError("a bundle needs at least one job-operation")
        ids = [m.jo_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("bundle members must be distinct")
        if self.mode not in ("serial", "parallel"):
            raise ValueError(f"unknown bundle mode {self.mode!r}")

    @property
    def name(self) -> str:
        if len(self.members) == 1:
            return self.members[0].jo_id
        digest = hashlib.sha256("\n".join(m.jo_id for m in self.members).encode()).hexdigest()
        return f"bundle-{digest[:16]}"


def make_bundles(jobops: Iterable[JobOperation], size: int = 1, mode: str = "serial") -> list[Bundle]:
    if size < 1:
        raise ValueError("bundle size must be >= 1")
    jobops = list(jobops)
    return [Bundle(tuple(jobops[i : i + size]), mode) for i in range(0, len(jobops), size)]


@dataclass(frozen=True)
class Dialect:
    name: str
    prefix: str
    # resource key -> directive body; rendered as f"{prefix} {body.format(value)}"
    directives: Mapping[str, str] = field(default_factory=dict)


SLURM = Dialect(
    "slurm",
    "#SBATCH",
    {
        "job_name": "--job-name={}",
        "nodes": "--nodes={}",
        "ntasks": "--ntasks={}",
        "cpus_per_task": "--cpus-per-task={}",
        "memory": "--mem={}",
        "walltime": "--time={}",
        "partition": "--partition={}",
        "account": "--account={}",
        "output": "--output={}",
    },
)

TORQUE = Dialect(
    "torque",
    "#PBS",
    {
        "job_name": "-N {}",
        "nodes": "-l nodes={}",
        "procs": "-l procs={}",
        "memory": "-l mem={}",
        "walltime": "-l walltime={}",
        "queue": "-q {}",
        "account": "-A {}",
        "output": "-o {}",
    },
)


def _member_line(jo: JobOperation) -> str:
    if jo.cwd:
        return f"(cd {shlex.quote(jo.cwd)} && {jo.cmd})"
    return jo.cmd


def generate_script(bundle: Bundle, dialect: Dialect, resources: Optional[Mapping] = None) -> str:
    """Render a POSIX shell submission script for *bundle*.

    Directive lines follow the shebang in the dialect's table order. Serial
    bundles run members one after another; parallel bundles background each
    member and end with ``wait``.
    """
    resources = dict(resources or {})
    unknown = sorted(set(resources) - set(dialect.directives))
    if unknown:
        raise SchedulerError(f"{dialect.name} does not support resource(s): {', '.join(unknown)}")
    lines = ["#!/bin/bash"]
    for key, body in dialect.directives.items():
        if key in resources and resources[key] is not None:
            lines.append(f"{dialect.prefix} {body.format(resources[key])}")
    lines.append("")
    if bundle.mode == "parallel":
        lines.extend(f"{_member_line(m)} &" for m in bundle.members)
        lines.append("wait")
    else:
        lines.extend(_member_line(m) for m in bundle.members)
    return "\n".join(lines) + "\n"


class Scheduler:
    name = "base"
    dialect: Dialect = SLURM

    def submit(self, script: str, jo_ids: Sequence[str]) -> str:
        raise NotImplementedError

    def status(self, jo_id: str) -> SchedulerStatus:
        return SchedulerStatus.unknown

    def __repr__(self):
        return f"{type(self).__name__}()"


class TemplateScheduler(Scheduler):
    """Generates scripts for a real scheduler but never talks to one."""

    def __init__(self, dialect: Dialect):
        self.dialect = dialect
        self.name = dialect.name

    def submit(self, script, jo_ids):
        raise SchedulerError(
            f"live {self.name} submission is not supported; use --pretend to print the scripts"
        )

    def __repr__(self):
        return f"TemplateScheduler({self.dialect.name!r})"


def SlurmTemplate() -> TemplateScheduler:
    return TemplateScheduler(SLURM)


def TorqueTemplate() -> TemplateScheduler:
    return TemplateScheduler(TORQUE)


_TRANSITIONS = {
    SchedulerStatus.queued: SchedulerStatus.active,
    SchedulerStatus.active: SchedulerStatus.completed,
}


class SimulatedScheduler(Scheduler):
    """In-memory queue whose state only changes when the caller says so.

    Submissions start ``queued``. :meth:`advance` moves every queued job to
    ``active`` and every active job to its scripted outcome (``completed``
    unless :attr:`outcomes` maps one of its job-operations to ``failed``).
    With ``state_file`` the queue survives across processes.

    ``accept_limit`` makes every submission after the first N raise
    :class:`SchedulerError`.
    """

    name = "simulated"

    def __init__(self, state_file=None, dialect: Dialect = SLURM, accept_limit: Optional[int] = None):
        self.dialect = dialect
        self.accept_limit = accept_limit
        self.outcomes: dict[str, SchedulerStatus] = {}
        self.state_file = Path(state_file) if state_file is not None else None
        self._next = 1
        self._jobs: dict[str, dict] = {}
        self._by_jo: dict[str, str] = {}
        if self.state_file is not None:
            self._load()

    def _load(self):
        state = read_document(self.state_file)
        if not state:
            return
        self._next = state["next"]
        self._jobs = state["jobs"]
        for cid, job in self._jobs.items():
            for jo in job["jo_ids"]:
                self._by_jo[jo] = cid

    def _save(self):
        if self.state_file is not None:
            write_document_atomic(self.state_file, {"next": self._next, "jobs": self._jobs})

    @property
    def scripts(self) -> dict[str, str]:
        return {cid: job["script"] for cid, job in self._jobs.items()}

    def submit(self, script, jo_ids):
        if self.accept_limit is not None and len(self._jobs) >= self.accept_limit:
            raise SchedulerError("simulated scheduler rejected the submission")
        cid = f"sim-{self._next}"
        self._next += 1
        self._jobs[cid] = {
            "status": SchedulerStatus.queued.value,
            "jo_ids": list(jo_ids),
            "script": script,
        }
        for jo in jo_ids:
            self._by_jo[jo] = cid
        self._save()
        return cid

    def cluster_status(self, cid: str) -> SchedulerStatus:
        job = self._jobs.get(cid)
        return SchedulerStatus(job["status"]) if job else SchedulerStatus.unknown

    def status(self, jo_id):
        cid = self._by_jo.get(jo_id)
        return self.cluster_status(cid) if cid else SchedulerStatus.unknown

    def set_status(self, cid: str, status) -> None:
        self._jobs[cid]["status"] = SchedulerStatus(status).value
        self._save()

    def advance(self) -> None:
        for job in self._jobs.values():
            cur = SchedulerStatus(job["status"])
            nxt = _TRANSITIONS.get(cur)
            if nxt is SchedulerStatus.completed:
                for jo in job["jo_ids"]:
                    if self.outcomes.get(jo) is SchedulerStatus.failed:
                        nxt = SchedulerStatus.failed
            if nxt is not None:
                job["status"] = nxt.value
        self._save()


SCHEDULERS: dict[str, Callable[..., Scheduler]] = {
    "slurm": SlurmTemplate,
    "torque": TorqueTemplate,
    "simulated": SimulatedScheduler,
}

DEFAULT_PROBES: dict[str, tuple] = {
    "slurm": ("sbatch", "squeue"),
    "torque": ("qsub", "qstat"),
}

SCHEDULER_ENV_VAR = "DATASPACE_SCHEDULER"


def detect_scheduler(
    environ: Optional[Mapping[str, str]] = None,
    probes: Optional[Mapping[str, Sequence[str]]] = None,
    which: Callable[[str], Optional[str]] = shutil.which,
    override: Optional[str] = None,
    **kwargs,
) -> Scheduler:
    """Pick a scheduler: explicit override, then ``$DATASPACE_SCHEDULER``,
    then the first probe whose commands are all on ``PATH``, else simulated.

    Extra keyword arguments go to the scheduler's constructor when it is
    the simulated one.
    """
    environ = os.environ if environ is None else environ
    name = override or environ.get(SCHEDULER_ENV_VAR)
    if not name:
        for candidate, commands in (DEFAULT_PROBES if probes is None else probes).items():
            if commands and all(which(c) for c in commands):
                name = candidate
                break
        else:
            name = "simulated"
    try:
        factory = SCHEDULERS[name]
    except KeyError:
        raise SchedulerError(f"unknown scheduler {name!r}; choose from {sorted(SCHEDULERS)}") from None
    return factory(**kwargs) if factory is SimulatedScheduler else factory()


class StatusStore:
    """Project-level record of submissions: ``jo_id -> {cluster_job_id, last_status}``."""

    FILENAME = ".flow_status.json"

    def __init__(self, root):
        self.path = Path(root) / self.FILENAME

    def load(self) -> dict:
        return read_document(self.path) or {}

    def save(self, records: Mapping) -> None:
        write_document_atomic(self.path, records)
