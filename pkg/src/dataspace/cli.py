"""The ``signac`` command line tool.

Exit codes: 0 success, 1 environment or state error, 2 usage or parse
error, 3 not found. Payload goes to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import check_statepoint
from .errors import (
    ConflictError,
    CorruptionError,
    DataspaceError,
    FilterParseError,
    NotAProjectError,
    StatePointError,
    SubmitError,
    TemplateError,
    UnknownIdError,
)
from .index import NDJSONSink, crawl_workspace, export
from .project import get_project, init_project
from .query import MISSING, lookup_path, parse_cli_tokens

EXIT_OK = 0
EXIT_STATE = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3

WORKFLOW_FILE = "workflow.json"
SIMULATED_QUEUE_FILE = ".flow_scheduler.json"

logger = logging.getLogger("dataspace.cli")


class UsageError(DataspaceError):
    pass


class NotFound(DataspaceError):
    pass


def _err(msg: str) -> None:
    print(f"signac: {msg}", file=sys.stderr)


def _read_json_arg(text: str):
    try:
        return json.loads(text)
    except ValueError as exc:
        raise UsageError(f"invalid JSON: {exc}") from None


def cmd_init(args) -> int:
    project = init_project(args.name, os.getcwd())
    print(project.root)
    return EXIT_OK


def cmd_job(args) -> int:
    text = args.statepoint
    if text is None or text == "-":
        text = sys.stdin.read()
    sp = _read_json_arg(text)
    if not isinstance(sp, dict):
        raise UsageError("the state point must be a JSON object")
    check_statepoint(sp)
    project = get_project()
    job = project.open_job(sp)
    if args.create:
        job.init()
    print(job.ws if args.workspace else job.id)
    return EXIT_OK


def cmd_find(args) -> int:
    expr = parse_cli_tokens(args.filter)
    project = get_project()
    for job in project.find_jobs(expr):
        print(job.id)
    return EXIT_OK


def cmd_document(args) -> int:
    project = get_project()
    job = project.open_job_by_id(args.id)
    if args.action == "get":
        if args.value is not None:
            raise UsageError("get takes no value")
        value = lookup_path(job.document.load(), args.key)
        if value is MISSING:
            raise NotFound(f"key {args.key!r} not in document of {job.id}")
        print(json.dumps(value, sort_keys=True, ensure_ascii=False))
        return EXIT_OK
    if args.value is None:
        raise UsageError("set needs a JSON value")
    value = _read_json_arg(args.value)
    doc = job.document.load()
    *parents, leaf = args.key.split(".")
    if not leaf or not all(parents):
        raise UsageError(f"invalid key {args.key!r}")
    cur = doc
    for seg in parents:
        nxt = cur.setdefault(seg, {})
        if not isinstance(nxt, dict):
            raise ConflictError(f"{seg!r} in {args.key!r} is not a mapping")
        cur = nxt
    cur[leaf] = value
    job.document.save(doc)
    return EXIT_OK


def cmd_index(args) -> int:
    project = get_project()
    records = crawl_workspace(project)
    if args.output:
        with NDJSONSink(args.output) as sink:
            n = export(records, sink)
    else:
        n = export(records, NDJSONSink(sys.stdout))
    logger.info("indexed %d jobs", n)
    return EXIT_OK


def cmd_fsck(args) -> int:
    project = get_project()
    problems = project.fsck()
    for name, problem in problems:
        print(f"{name}: {problem}")
    return EXIT_STATE if problems else EXIT_OK


def _workflow(args):
    from .flow import Workflow

    project = get_project()
    path = Path(args.workflow) if args.workflow else project.root / WORKFLOW_FILE
    if not path.is_file():
        raise FileNotFoundError(f"workflow file not found: {path}")
    try:
        return Workflow.from_file(project, path)
    except (ValueError, TemplateError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _scheduler(args, project):
    from .flow import detect_scheduler

    # The simulated queue is persisted so repeated invocations see earlier submissions.
    return detect_scheduler(override=args.scheduler, state_file=project.root / SIMULATED_QUEUE_FILE)


def cmd_status(args) -> int:
    from .flow import format_status_table

    wf = _workflow(args)
    sched = _scheduler(args, wf.project) if args.scheduler else None
    table = wf.status(scheduler=sched)
    if args.json:
        print(json.dumps(table, sort_keys=True, indent=2))
    else:
        sys.stdout.write(format_status_table(table))
    return EXIT_OK


def cmd_run(args) -> int:
    wf = _workflow(args)
    try:
        report = wf.run(
            op_names=args.operations or None,
            pretend=args.pretend,
            to_completion=args.to_completion,
            parallel=args.jobs,
            out=sys.stdout,
            stdout=sys.stderr.fileno() if not args.pretend else None,
        )
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    if not args.pretend:
        for rec in report.records:
            print(f"{rec.jo_id} {rec.returncode}")
    if report.failed:
        _err(f"{len(report.failed)} job-operation(s) failed")
    if report.hit_limit:
        _err("stopped at the execution limit; the workflow does not converge")
    return EXIT_OK


def cmd_submit(args) -> int:
    wf = _workflow(args)
    sched = _scheduler(args, wf.project)
    resources = {}
    for item in args.resource or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected KEY=VALUE, got {item!r}")
        resources[key] = value
    try:
        ids = wf.submit(
            sched,
            bundle_size=args.bundle,
            parallel=args.parallel,
            op_names=args.operations or None,
            resources=resources,
            pretend=args.pretend,
            out=sys.stdout,
        )
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    except SubmitError as exc:
        for cid in exc.submitted:
            print(cid)
        _err(str(exc))
        print(f"{len(exc.submitted)} submitted", file=sys.stderr)
        return EXIT_STATE
    for cid in ids:
        print(cid)
    if not args.pretend:
        print(f"{len(ids)} submitted", file=sys.stderr)
    return EXIT_OK


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("init", help="initialize a project in the current directory")
    p.add_argument("name")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("job", help="print the id or workspace of a state point")
    p.add_argument("statepoint", nargs="?", help="JSON state point, or '-' for stdin")
    p.add_argument("-w", "--workspace", action="store_true", help="print the workspace path")
    p.add_argument("-c", "--create", action="store_true", help="initialize the job")
    p.set_defaults(func=cmd_job)

    p = sub.add_parser("find", help="print ids of jobs matching a filter")
    p.add_argument("filter", nargs=argparse.REMAINDER, help="path[.$op] value pairs or a JSON filter")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("document", help="get or set a job document value")
    p.add_argument("id")
    p.add_argument("action", choices=("get", "set"))
    p.add_argument("key")
    p.add_argument("value", nargs="?")
    p.set_defaults(func=cmd_document)

    p = sub.add_parser("index", help="write an NDJSON index of the workspace")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("fsck", help="check that directory names match state point ids")
    p.set_defaults(func=cmd_fsck)

    for verb, func in (("status", cmd_status), ("run", cmd_run), ("submit", cmd_submit)):
        p = sub.add_parser(verb)
        p.add_argument("--workflow", help=f"workflow definition (default: <root>/{WORKFLOW_FILE})")
        p.set_defaults(func=func)
        if verb == "status":
            p.add_argument("--json", action="store_true")
            p.add_argument("--scheduler")
        elif verb == "run":
            p.add_argument("operations", nargs="*", metavar="OP")
            p.add_argument("--pretend", action="store_true")
            p.add_argument("--to-completion", action="store_true")
            p.add_argument("-j", "--jobs", type=_positive_int, default=1, help="parallel executions")
        else:
            p.add_argument("operations", nargs="*", metavar="OP")
            p.add_argument("--bundle", type=_positive_int, default=1)
            p.add_argument("--parallel", action="store_true")
            p.add_argument("--scheduler")
            p.add_argument("--pretend", action="store_true")
            p.add_argument("--resource", action="append", metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, FilterParseError, StatePointError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except NotFound as exc:
        _err(str(exc))
        return EXIT_NOT_FOUND
    except (NotAProjectError, ConflictError, UnknownIdError, CorruptionError, DataspaceError, OSError) as exc:
        _err(str(exc))
        return EXIT_STATE


if __name__ == "__main__":
    sys.exit(main())
