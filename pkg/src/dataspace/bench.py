"""Workspace scaling benchmarks.

Six metadata operations are timed on synthetic workspaces of increasing size:

1. open a job by known id                 (expected O(1))
2. search with a filter on every key      (O(N))
3. search with a filter on one key        (O(N))
4. first full iteration in a new session  (O(N))
5. repeated iteration in the same session (O(N))
6. count the jobs                         (O(N))

Each session uses a fresh :class:`~dataspace.project.Project` handle, so the
in-process cache is cold; the OS page cache is not flushed.
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import random
import shutil
import string
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .core import write_document_atomic
from .project import Project, init_project

CATEGORIES = {
    1: "select_by_id",
    2: "search_rich_filter",
    3: "search_lean_filter",
    4: "first_iteration",
    5: "repeated_iteration",
    6: "data_space_size",
}
CONSTANT_CATEGORIES = frozenset({1})

INDEX_KEY = "i"
_ALPHABET = string.ascii_letters + string.digits


@dataclass
class BenchmarkConfig:
    sizes: list = field(default_factory=lambda: [100, 1000, 10000])
    keys_per_statepoint: int = 10
    value_length: int = 100
    repetitions: int = 3
    runs: int = 10
    seed: int = 0

    def __post_init__(self):
        if list(self.sizes) != sorted(self.sizes):
            raise ValueError("sizes must be ascending")
        if self.keys_per_statepoint < 1:
            raise ValueError("keys_per_statepoint must be >= 1")


def _key_names(count: int) -> list[str]:
    names = [c for c in string.ascii_letters if c != INDEX_KEY]
    if count > len(names):
        names += ["".join(p) for p in itertools.product(string.ascii_lowercase, repeat=2)]
    return names[:count]


def make_statepoint(index: int, keys: list[str], value_length: int, rng: random.Random) -> dict:
    sp = {INDEX_KEY: index}
    for k in keys:
        sp[k] = "".join(rng.choices(_ALPHABET, k=value_length))
    return sp


def generate_corpus(config: BenchmarkConfig, n: int, target) -> Project:
    """Create a project with *n* jobs under the empty directory *target*.

    The output is byte-identical for a fixed ``(config.seed, n)``.
    """
    target = Path(target)
    if target.exists() and any(target.iterdir()):
        raise FileExistsError(f"benchmark target {target} is not empty")
    target.mkdir(parents=True, exist_ok=True)
    project = init_project(f"bench-{n}", target)
    rng = random.Random(config.seed)
    keys = _key_names(config.keys_per_statepoint - 1)
    for i in range(n):
        sp = make_statepoint(i, keys, config.value_length, rng)
        project.open_job(sp).init()
    return Project(target)


@dataclass
class BenchmarkReport:
    config: dict
    # one dict per (category, N): category, name, N, min, mean, divisor, normalized
    results: list

    def entry(self, category: int, n: int) -> dict:
        for r in self.results:
            if r["category"] == category and r["N"] == n:
                return r
        raise KeyError((category, n))

    @property
    def sizes(self) -> list[int]:
        return sorted({r["N"] for r in self.results})

    def to_json(self) -> dict:
        results = sorted(self.results, key=lambda r: (r["category"], r["N"]))
        return {"config": self.config, "results": results}

    @classmethod
    def from_json(cls, doc: dict) -> "BenchmarkReport":
        return cls(doc["config"], list(doc["results"]))

    def save(self, path) -> None:
        write_document_atomic(path, self.to_json(), fsync=False)

    @classmethod
    def load(cls, path) -> "BenchmarkReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _mean_time(fn, runs: int) -> float:
    t0 = time.perf_counter()
    for _ in range(runs):
        fn()
    return (time.perf_counter() - t0) / runs


def _measure_size(root: Path, n: int, config: BenchmarkConfig, rng: random.Random) -> dict[int, list[float]]:
    samples: dict[int, list[float]] = {c: [] for c in CATEGORIES}
    ids = sorted(os.listdir(Project(root).workspace)) if n else []
    for _ in range(config.repetitions):
        project = Project(root)
        t0 = time.perf_counter()
        jobs = list(project.iterate_jobs())
        samples[4].append(time.perf_counter() - t0)

        if ids:
            picks = [rng.choice(ids) for _ in range(config.runs)]
            it = iter(picks)
            samples[1].append(_mean_time(lambda: project.open_job_by_id(next(it)), config.runs))
            sp = project.open_job_by_id(rng.choice(ids)).statepoint
            rich = dict(sp)
            lean_key = next((k for k in sp if k != INDEX_KEY), INDEX_KEY)
            lean = {lean_key: sp[lean_key]}
        else:
            samples[1].append(0.0)
            rich = lean = {INDEX_KEY: 0}
        samples[2].append(_mean_time(lambda: project.find_jobs(rich), config.runs))
        samples[3].append(_mean_time(lambda: project.find_jobs(lean), config.runs))
        samples[5].append(_mean_time(lambda: list(project.iterate_jobs()), config.runs))
        samples[6].append(_mean_time(project.num_jobs, config.runs))
        del jobs
    return samples


def run_benchmarks(config: BenchmarkConfig, corpora: dict) -> BenchmarkReport:
    """Time all six categories on each corpus (``{N: project_root}``).

    ``min`` is the best session, ``mean`` the average session; categories
    other than 4 average ``config.runs`` calls within a session.
    """
    missing = [n for n in config.sizes if n not in corpora or not Path(corpora[n]).is_dir()]
    if missing:
        raise FileNotFoundError(f"no corpus for N={missing}")
    rng = random.Random(config.seed)
    results = []
    for n in config.sizes:
        samples = _measure_size(Path(corpora[n]), n, config, rng)
        for cat, values in samples.items():
            divisor = 1 if cat in CONSTANT_CATEGORIES else max(n, 1)
            best = min(values)
            results.append({
                "category": cat,
                "name": CATEGORIES[cat],
                "N": n,
                "min": best,
                "mean": sum(values) / len(values),
                "divisor": divisor,
                "normalized": best / divisor,
            })
    return BenchmarkReport(asdict(config), results)


@dataclass
class ScalingVerdict:
    passed: bool
    details: list
    failed_categories: list

    def __bool__(self):
        return self.passed


def assert_scaling(report: BenchmarkReport, const_tol: float = 5.0, linear_tol: float = 3.0) -> ScalingVerdict:
    """Check that category 1 is flat and categories 2-6 are linear in N.

    Category 1 passes if the times at the smallest and largest N differ by at
    most ``const_tol``; the others pass if time/N varies by at most
    ``linear_tol`` across all sizes.
    """
    sizes = [n for n in report.sizes if n > 0]
    if len(sizes) < 2 or sizes[-1] < 10 * sizes[0]:
        raise ValueError("scaling check needs at least two sizes differing by 10x or more")
    details, failed = [], []
    for cat, name in CATEGORIES.items():
        if cat in CONSTANT_CATEGORIES:
            lo, hi = report.entry(cat, sizes[0])["min"], report.entry(cat, sizes[-1])["min"]
            ratio = max(lo, hi) / max(min(lo, hi), 1e-12)
            ok = ratio <= const_tol
            details.append(f"category {cat} ({name}): time ratio {ratio:.2f} (limit {const_tol}) {'ok' if ok else 'FAIL'}")
        else:
            per_item = [report.entry(cat, n)["min"] / n for n in sizes]
            ratio = max(per_item) / max(min(per_item), 1e-15)
            ok = ratio <= linear_tol
            details.append(f"category {cat} ({name}): per-item ratio {ratio:.2f} (limit {linear_tol}) {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(cat)
    return ScalingVerdict(not failed, details, failed)


def _parse_sizes(text: str) -> list[int]:
    try:
        return sorted(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}") from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bench", description="workspace scaling benchmarks")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run")
    p.add_argument("--sizes", type=_parse_sizes, default=[100, 1000, 10000])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--output", help="report path (default: stdout)")
    p.add_argument("--root", help="directory for the corpora (default: a temporary one)")
    p = sub.add_parser("check")
    p.add_argument("report")
    p.add_argument("--const-tol", type=float, default=5.0)
    p.add_argument("--linear-tol", type=float, default=3.0)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verb == "check":
        try:
            verdict = assert_scaling(BenchmarkReport.load(args.report), args.const_tol, args.linear_tol)
        except (OSError, ValueError, KeyError) as exc:
            print(f"bench: {exc}", file=sys.stderr)
            return 2
        for line in verdict.details:
            print(line)
        return 0 if verdict.passed else 1

    config = BenchmarkConfig(
        sizes=args.sizes, repetitions=args.repetitions, runs=args.runs, seed=args.seed
    )
    root = Path(args.root) if args.root else Path(tempfile.mkdtemp(prefix="bench-"))
    try:
        corpora = {}
        for n in config.sizes:
            corpora[n] = root / f"N{n}"
            print(f"generating N={n}", file=sys.stderr)
            generate_corpus(config, n, corpora[n])
        report = run_benchmarks(config, corpora)
    finally:
        if not args.root:
            shutil.rmtree(root, ignore_errors=True)
    if args.output:
        report.save(args.output)
    else:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
