import hashlib
import io
import json
import os
import random

import pytest

from conftest import ideal_gas_sp
from dataspace.errors import ExportError, StaleIndexError
from dataspace.index import (
    FormatRule,
    IndexRecord,
    MemorySink,
    NDJSONSink,
    WorkspaceCrawler,
    crawl_workspace,
    export,
    fetch,
    load_ndjson,
    search_records,
)
from oracles import random_doc, random_filter


def _write_volumes(project):
    for job in project:
        with open(job.fn("V.txt"), "w") as fh:
            fh.write(f"{job.sp.N * job.sp.kT / job.sp.p}\n")


def _read_volume(path):
    return {"V": float(path.read_text())}


def _tree_digest(root):
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for fn in sorted(filenames):
            p = os.path.join(dirpath, fn)
            st = os.stat(p)
            h.update(p.encode())
            h.update(str(st.st_mtime_ns).encode())
            with open(p, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


class TestCrawl:
    def test_three_jobs_with_volume(self, ideal_gas):
        _write_volumes(ideal_gas)
        records = list(crawl_workspace(ideal_gas))
        assert len(records) == 3
        assert [r.id for r in records] == sorted(j.id for j in ideal_gas)
        for rec in records:
            assert [f["name"] for f in rec.files] == ["V.txt"]
            assert rec.files[0]["format"] == "File"
            assert rec.root == str(ideal_gas.workspace / rec.id)

    def test_empty_project(self, project):
        assert list(crawl_workspace(project)) == []

    def test_reserved_files_not_listed(self, ideal_gas):
        job = next(iter(ideal_gas))
        job.document["a"] = 1
        rec = next(r for r in crawl_workspace(ideal_gas) if r.id == job.id)
        assert rec.files == [] and rec.document == {"a": 1}

    def test_subdirectories_listed(self, project):
        job = project.open_job({"a": 1}).init()
        os.makedirs(job.fn("out/frames"))
        with open(job.fn("out/frames/0.dat"), "w") as fh:
            fh.write("x")
        (rec,) = crawl_workspace(project)
        assert [f["name"] for f in rec.files] == ["out/frames/0.dat"]

    def test_format_rule_and_extractor(self, ideal_gas):
        _write_volumes(ideal_gas)
        rules = [FormatRule("V.txt", "VolumeText", _read_volume)]
        records = {r.statepoint["p"]: r for r in crawl_workspace(ideal_gas, rules)}
        assert records[0.1].document["derived"]["V"] == 10000.0
        assert records[10.0].document["derived"]["V"] == 100.0
        assert records[1.0].files[0]["format"] == "VolumeText"

    def test_extractor_error_noted(self, ideal_gas):
        job = ideal_gas.open_job(ideal_gas_sp(1.0))
        with open(job.fn("V.txt"), "w") as fh:
            fh.write("not a number")
        rules = [FormatRule("*.txt", "VolumeText", _read_volume)]
        records = {r.id: r for r in crawl_workspace(ideal_gas, rules)}
        assert len(records) == 3
        assert "error" in records[job.id].files[0]
        assert "derived" not in records[job.id].document

    def test_corrupt_jobs_skipped(self, ideal_gas):
        bad = ideal_gas.workspace / ("a" * 32)
        bad.mkdir()
        (bad / "signac_statepoint.json").write_text("{")
        assert len(list(crawl_workspace(ideal_gas))) == 3

    def test_any_directory(self, ideal_gas, tmp_path):
        records = list(WorkspaceCrawler().crawl(ideal_gas.workspace))
        assert len(records) == 3
        assert list(WorkspaceCrawler().crawl(tmp_path / "absent")) == []

    def test_deterministic(self, ideal_gas):
        _write_volumes(ideal_gas)
        first = [r.to_json() for r in crawl_workspace(ideal_gas)]
        second = [r.to_json() for r in crawl_workspace(ideal_gas)]
        assert first == second

    def test_read_only(self, ideal_gas):
        _write_volumes(ideal_gas)
        before = _tree_digest(ideal_gas.root)
        rules = [FormatRule("V.txt", "VolumeText", _read_volume)]
        export(crawl_workspace(ideal_gas, rules), MemorySink())
        assert _tree_digest(ideal_gas.root) == before


class TestFetch:
    def test_fetch(self, ideal_gas):
        _write_volumes(ideal_gas)
        rec = next(iter(crawl_workspace(ideal_gas)))
        path = fetch(rec, "V.txt")
        assert float(open(path).read()) == rec.statepoint["N"] * rec.statepoint["kT"] / rec.statepoint["p"]

    def test_stale(self, ideal_gas):
        _write_volumes(ideal_gas)
        rec = next(iter(crawl_workspace(ideal_gas)))
        os.unlink(os.path.join(rec.root, "V.txt"))
        with pytest.raises(StaleIndexError):
            fetch(rec, "V.txt")

    def test_unlisted(self, ideal_gas):
        rec = next(iter(crawl_workspace(ideal_gas)))
        with pytest.raises(KeyError):
            fetch(rec, "V.txt")


class TestExport:
    def test_ndjson_shape(self, ideal_gas, tmp_path):
        _write_volumes(ideal_gas)
        out = tmp_path / "index.ndjson"
        with NDJSONSink(out) as sink:
            assert export(crawl_workspace(ideal_gas), sink) == 3
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        for line in lines:
            doc = json.loads(line)
            assert set(doc) == {"_id", "statepoint", "root", "files", "document"}
            assert doc["files"][0]["name"] == "V.txt"

    def test_stream_target(self, ideal_gas):
        buf = io.StringIO()
        export(crawl_workspace(ideal_gas), NDJSONSink(buf))
        buf.seek(0)
        assert len(load_ndjson(buf)) == 3

    def test_empty_export(self, project, tmp_path):
        out = tmp_path / "empty.ndjson"
        with NDJSONSink(out) as sink:
            assert export(crawl_workspace(project), sink) == 0
        assert out.read_text() == ""

    def test_roundtrip_record(self, ideal_gas):
        rec = next(iter(crawl_workspace(ideal_gas)))
        assert IndexRecord.from_json(rec.to_json()) == rec

    def test_sink_failure_reports_count(self, ideal_gas):
        class Broken(MemorySink):
            def write(self, record):
                if len(self._pending) == 2:
                    raise OSError("disk full")
                super().write(record)

        with pytest.raises(ExportError) as info:
            export(crawl_workspace(ideal_gas), Broken())
        assert info.value.count == 2

    def test_memory_sink_matches_find_jobs(self, project):
        rng = random.Random(1)
        for i in range(80):
            sp = random_doc(rng)
            sp["i"] = i
            job = project.open_job(sp).init()
            if i % 4 == 0:
                job.document["step"] = i
        sink = MemorySink()
        export(crawl_workspace(project), sink)
        for _ in range(60):
            flt = random_filter(rng)
            assert search_records(sink.records, flt) == [j.id for j in project.find_jobs(flt)]
        assert search_records(sink.records, {"doc.step.$gte": 40}) == [
            j.id for j in project.find_jobs({"doc.step.$gte": 40})
        ]
