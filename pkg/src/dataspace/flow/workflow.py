"""Operations with pre/post conditions and the verbs that act on them.

An operation is eligible for a job when all of its pre-conditions hold and
not all of its post-conditions hold. An operation without post-conditions is
never considered complete: it is eligible whenever its pre-conditions hold.
"""
from __future__ import annotations

import json
import logging
import re
import subprocess
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping, Optional, Sequence

from ..core import read_document
from ..errors import SchedulerError, SubmitError, TemplateError
from ..project import Job, Project
from ..query import MISSING, lookup_path
from .conditions import Condition, parse_condition
from .scheduling import (
    JobOperation,
    Scheduler,
    SchedulerStatus,
    StatusStore,
    generate_script,
    make_bundles,
)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([^{}]*)\}")
_ACTIVE = (SchedulerStatus.queued, SchedulerStatus.active)


def _check_placeholder(expr: str, template: str) -> None:
    if expr in ("job.id", "job._id", "job.ws"):
        return
    if expr.startswith("job.sp.") and all(expr[len("job.sp."):].split(".")):
        return
    raise TemplateError(f"unsupported placeholder {{{expr}}} in {template!r}")


def _render_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        return float.__repr__(value)
    if isinstance(value, int) and not isinstance(value, bool):
        return int.__repr__(value)
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class OperationDef:
    name: str
    cmd: str
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ValueError("operation name must be a non-empty string")
        self.pre = [parse_condition(c) if isinstance(c, str) else _as_condition(c) for c in self.pre]
        self.post = [parse_condition(c) if isinstance(c, str) else _as_condition(c) for c in self.post]
        for m in _TOKEN_RE.finditer(self.cmd):
            if m.group(1) is not None:
                _check_placeholder(m.group(1), self.cmd)


def _as_condition(c) -> Condition:
    if isinstance(c, Condition):
        return c
    if callable(c):
        return Condition(getattr(c, "__name__", repr(c)), c)
    raise TypeError(f"not a condition: {c!r}")


def render_cmd(op: OperationDef, job: Job) -> str:
    """Substitute ``{job.id}``, ``{job.ws}`` and ``{job.sp.<path>}`` in the command."""

    def sub(m):
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        expr = m.group(1)
        if expr in ("job.id", "job._id"):
            return job.id
        if expr == "job.ws":
            return job.ws
        value = lookup_path(job._sp, expr[len("job.sp."):])
        if value is MISSING:
            raise TemplateError(f"cannot resolve {{{expr}}} for job {job.id}")
        return _render_value(value)

    return _TOKEN_RE.sub(sub, op.cmd)


def is_complete(op: OperationDef, job: Job) -> bool:
    return bool(op.post) and all(c(job) for c in op.post)


def eligible(op: OperationDef, job: Job) -> bool:
    """All pre-conditions hold and not all post-conditions hold."""
    return all(c(job) for c in op.pre) and not is_complete(op, job)


@dataclass
class RunRecord:
    jo_id: str
    job_id: str
    op_name: str
    cmd: str
    returncode: Optional[int]


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    passes: int = 0
    hit_limit: bool = False

    @property
    def failed(self) -> list:
        return [r for r in self.records if r.returncode not in (0, None)]


class Workflow:
    """A set of named operations acting on the jobs of one project.

    Several workflows may share a project; they only share its workspace and
    status store.
    """

    def __init__(self, project: Project, operations: Sequence[OperationDef] = ()):
        self.project = project
        self.operations: list[OperationDef] = []
        self._running: set[str] = set()
        self._lock = threading.Lock()
        for op in operations:
            self._add(op)

    def _add(self, op: OperationDef) -> OperationDef:
        if any(o.name == op.name for o in self.operations):
            raise ValueError(f"duplicate operation name {op.name!r}")
        self.operations.append(op)
        return op

    def add_operation(self, name, cmd, pre=(), post=()) -> OperationDef:
        return self._add(OperationDef(name, cmd, list(pre), list(post)))

    @classmethod
    def from_dict(cls, project: Project, spec: Mapping) -> "Workflow":
        try:
            ops = spec["operations"]
            return cls(project, [
                OperationDef(o["name"], o["cmd"], list(o.get("pre", ())), list(o.get("post", ())))
                for o in ops
            ])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed workflow definition: {exc!r}") from None

    @classmethod
    def from_file(cls, project: Project, path) -> "Workflow":
        spec = read_document(path)
        if spec is None:
            raise FileNotFoundError(f"workflow file not found: {path}")
        return cls.from_dict(project, spec)

    def operation(self, name: str) -> OperationDef:
        for op in self.operations:
            if op.name == name:
                return op
        raise KeyError(f"no operation named {name!r}")

    def _select(self, op_names) -> list[OperationDef]:
        if op_names is None:
            return list(self.operations)
        return [self.operation(n) for n in op_names]

    def _jobs(self, jobs) -> list[Job]:
        return list(self.project.iterate_jobs()) if jobs is None else list(jobs)

    def next_operations(self, job: Job) -> list[OperationDef]:
        return [op for op in self.operations if eligible(op, job)]

    def jobop(self, op: OperationDef, job: Job) -> JobOperation:
        return JobOperation(job.id, op.name, render_cmd(op, job), job.ws)

    def run(
        self,
        op_names: Optional[Sequence[str]] = None,
        pretend: bool = False,
        to_completion: bool = False,
        jobs=None,
        parallel: int = 1,
        out: Optional[IO[str]] = None,
        stdout=None,
        stderr=None,
    ) -> RunReport:
        """Execute the first eligible operation of every job.

        Each execution is a shell child process started in the job's
        workspace. With ``to_completion`` the pass repeats until nothing is
        eligible; a job-operation that fails is not retried within the call,
        and the total number of executions is capped at
        ``len(operations) * len(jobs)``. In ``pretend`` mode the commands are
        written to *out* and nothing runs.
        """
        ops = self._select(op_names)
        jobs = self._jobs(jobs)
        out = sys.stdout if out is None else out
        report = RunReport()
        limit = len(self.operations) * len(jobs)
        skip: set[str] = set()

        def pick(job):
            for op in ops:
                jo_id = f"{job.id}-{op.name}"
                if jo_id not in skip and eligible(op, job):
                    return op
            return None

        def execute(job):
            op = pick(job)
            if op is None:
                return None
            jo = self.jobop(op, job)
            with self._lock:
                if jo.jo_id in self._running:
                    logger.warning("%s is already running; skipped", jo.jo_id)
                    return None
                self._running.add(jo.jo_id)
            try:
                logger.info("running %s: %s", jo.jo_id, jo.cmd)
                proc = subprocess.run(jo.cmd, shell=True, cwd=jo.cwd, stdout=stdout, stderr=stderr)
            finally:
                with self._lock:
                    self._running.discard(jo.jo_id)
            if proc.returncode != 0:
                logger.warning("%s exited with status %d", jo.jo_id, proc.returncode)
            return RunRecord(jo.jo_id, job.id, op.name, jo.cmd, proc.returncode)

        if pretend:
            for job in jobs:
                op = pick(job)
                if op is not None:
                    jo = self.jobop(op, job)
                    print(jo.cmd, file=out)
                    report.records.append(RunRecord(jo.jo_id, job.id, op.name, jo.cmd, None))
            report.passes = 1
            return report

        while True:
            remaining = limit - len(report.records)
            if remaining <= 0:
                report.hit_limit = any(pick(j) for j in jobs)
                break
            candidates = [j for j in jobs if pick(j) is not None][:remaining]
            if not candidates:
                break
            report.passes += 1
            if parallel > 1:
                with ThreadPoolExecutor(parallel) as pool:
                    results = list(pool.map(execute, candidates))
            else:
                results = [execute(j) for j in candidates]
            done = [r for r in results if r is not None]
            report.records.extend(done)
            for r in done:
                if r.returncode != 0:
                    skip.add(r.jo_id)
            if not to_completion or not done:
                break
        if report.hit_limit:
            logger.warning("stopped after %d executions; the workflow does not converge", limit)
        return report

    def _refresh_status(self, scheduler: Optional[Scheduler], records: dict, jo_id: str) -> SchedulerStatus:
        rec = records.get(jo_id)
        if rec is None:
            return SchedulerStatus.unknown
        if scheduler is None:
            return SchedulerStatus(rec.get("last_status", "unknown"))
        st = scheduler.status(jo_id)
        rec["last_status"] = st.value
        return st

    def submit(
        self,
        scheduler: Scheduler,
        bundle_size: int = 1,
        parallel: bool = False,
        op_names: Optional[Sequence[str]] = None,
        resources: Optional[Mapping] = None,
        pretend: bool = False,
        jobs=None,
        out: Optional[IO[str]] = None,
    ) -> list[str]:
        """Submit every eligible job-operation that is not already queued or active.

        Returns the cluster job ids of the submitted bundles. If the scheduler
        rejects a bundle, :class:`SubmitError` carries the ids submitted so
        far; those are kept.
        """
        ops = self._select(op_names)
        store = StatusStore(self.project.root)
        records = store.load()
        pending = []
        for job in self._jobs(jobs):
            for op in ops:
                if not eligible(op, job):
                    continue
                jo = self.jobop(op, job)
                if self._refresh_status(scheduler, records, jo.jo_id) in _ACTIVE:
                    continue
                pending.append(jo)
        mode = "parallel" if parallel else "serial"
        submitted: list[str] = []
        out = sys.stdout if out is None else out
        try:
            for bundle in make_bundles(pending, bundle_size, mode):
                res = {"job_name": bundle.name}
                res.update(resources or {})
                script = generate_script(bundle, scheduler.dialect, res)
                if pretend:
                    out.write(script)
                    continue
                try:
                    cid = scheduler.submit(script, [m.jo_id for m in bundle.members])
                except SchedulerError as exc:
                    raise SubmitError(
                        f"scheduler rejected bundle {bundle.name} after {len(submitted)} submissions: {exc}",
                        submitted,
                    ) from exc
                for m in bundle.members:
                    records[m.jo_id] = {"cluster_job_id": cid, "last_status": SchedulerStatus.queued.value}
                submitted.append(cid)
        finally:
            if not pretend:
                store.save(records)
        return submitted

    def status(self, scheduler: Optional[Scheduler] = None, jobs=None) -> dict:
        """``{job_id: {op_name: {"state": ..., "scheduler_status": ...}}}``.

        ``state`` is ``completed`` (all post-conditions hold), ``eligible`` or
        ``blocked`` (some pre-condition fails).
        """
        records = StatusStore(self.project.root).load()
        table = {}
        for job in self._jobs(jobs):
            row = {}
            for op in self.operations:
                if is_complete(op, job):
                    state = "completed"
                elif all(c(job) for c in op.pre):
                    state = "eligible"
                else:
                    state = "blocked"
                sched = self._refresh_status(scheduler, records, f"{job.id}-{op.name}")
                row[op.name] = {"state": state, "scheduler_status": sched.value}
            table[job.id] = row
        return table


def format_status_table(status: Mapping) -> str:
    """Render the output of :meth:`Workflow.status` as an aligned text table."""
    op_names: list[str] = []
    for row in status.values():
        for name in row:
            if name not in op_names:
                op_names.append(name)
    header = ["job_id", *op_names]
    rows = []
    for job_id, row in status.items():
        cells = [job_id]
        for name in op_names:
            entry = row.get(name)
            if entry is None:
                cells.append("-")
                continue
            cell = entry["state"]
            if entry["scheduler_status"] != SchedulerStatus.unknown.value:
                cell += f" ({entry['scheduler_status']})"
            cells.append(cell)
        rows.append(cells)
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def load_workflow(project: Project, path=None) -> Workflow:
    path = Path(project.root / "workflow.json" if path is None else path)
    return Workflow.from_file(project, path)
