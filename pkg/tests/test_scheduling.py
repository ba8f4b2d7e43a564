from pathlib import Path

import pytest

from dataspace.errors import SchedulerError
from dataspace.flow import (
    SLURM,
    TORQUE,
    Bundle,
    JobOperation,
    SchedulerStatus,
    SimulatedScheduler,
    SlurmTemplate,
    StatusStore,
    TemplateScheduler,
    detect_scheduler,
    generate_script,
    make_bundles,
)

GOLDEN = Path(__file__).parent / "golden"

MEMBERS = (
    JobOperation("aaa", "compute_volume", "idg 1000 1.0 0.1 > V.txt", "/scratch/ws/aaa"),
    JobOperation("bbb", "compute_volume", "idg 1000 1.0 10.0 > V.txt", "/scratch/ws/bbb"),
)
SLURM_RES = {"job_name": "ig", "partition": "short", "walltime": "01:00:00", "nodes": 1}
TORQUE_RES = {"job_name": "ig", "queue": "short", "walltime": "01:00:00", "nodes": 1}


@pytest.mark.parametrize(
    "dialect,res,mode,golden",
    [
        (SLURM, SLURM_RES, "serial", "slurm_serial.sh"),
        (SLURM, SLURM_RES, "parallel", "slurm_parallel.sh"),
        (TORQUE, TORQUE_RES, "serial", "torque_serial.sh"),
        (TORQUE, TORQUE_RES, "parallel", "torque_parallel.sh"),
    ],
)
def test_golden_scripts(dialect, res, mode, golden):
    script = generate_script(Bundle(MEMBERS, mode), dialect, res)
    assert script == (GOLDEN / golden).read_text()


def test_deterministic():
    a = generate_script(Bundle(MEMBERS), SLURM, SLURM_RES)
    b = generate_script(Bundle(MEMBERS), SLURM, dict(reversed(list(SLURM_RES.items()))))
    assert a == b


def test_cwd_is_quoted():
    jo = JobOperation("x", "op", "true", "/tmp/with space")
    assert "(cd '/tmp/with space' && true)" in generate_script(Bundle((jo,)), SLURM)


def test_unsupported_resource_names_key():
    with pytest.raises(SchedulerError, match="gpus"):
        generate_script(Bundle(MEMBERS), SLURM, {"gpus": 2})
    with pytest.raises(SchedulerError, match="partition"):
        generate_script(Bundle(MEMBERS), TORQUE, {"partition": "x"})


class TestBundles:
    def test_sizes(self):
        jos = [JobOperation(f"j{i}", "op") for i in range(5)]
        assert [len(b.members) for b in make_bundles(jos, 2)] == [2, 2, 1]
        assert [len(b.members) for b in make_bundles(jos, 10)] == [5]
        assert make_bundles([], 3) == []

    def test_names(self):
        one = Bundle((MEMBERS[0],))
        assert one.name == "aaa-compute_volume"
        assert Bundle(MEMBERS).name.startswith("bundle-")
        assert Bundle(MEMBERS).name != Bundle(MEMBERS[::-1]).name

    @pytest.mark.parametrize("members,mode", [((), "serial"), ((MEMBERS[0], MEMBERS[0]), "serial"), (MEMBERS, "odd")])
    def test_invalid(self, members, mode):
        with pytest.raises(ValueError):
            Bundle(members, mode)

    def test_bad_size(self):
        with pytest.raises(ValueError):
            make_bundles(MEMBERS, 0)


class TestSimulated:
    def test_lifecycle(self):
        s = SimulatedScheduler()
        cid = s.submit("#!/bin/bash\n", ["a-op"])
        assert cid == "sim-1" and s.status("a-op") is SchedulerStatus.queued
        s.advance()
        assert s.status("a-op") is SchedulerStatus.active
        s.advance()
        assert s.status("a-op") is SchedulerStatus.completed
        s.advance()
        assert s.status("a-op") is SchedulerStatus.completed
        assert s.status("other") is SchedulerStatus.unknown

    def test_scripted_failure(self):
        s = SimulatedScheduler()
        s.outcomes["b-op"] = SchedulerStatus.failed
        s.submit("x", ["a-op", "b-op"])
        s.advance()
        s.advance()
        assert s.status("a-op") is SchedulerStatus.failed

    def test_set_status(self):
        s = SimulatedScheduler()
        cid = s.submit("x", ["a-op"])
        s.set_status(cid, "active")
        assert s.cluster_status(cid) is SchedulerStatus.active

    def test_accept_limit(self):
        s = SimulatedScheduler(accept_limit=1)
        s.submit("x", ["a"])
        with pytest.raises(SchedulerError):
            s.submit("y", ["b"])

    def test_persistence(self, tmp_path):
        path = tmp_path / "sched.json"
        a = SimulatedScheduler(path)
        cid = a.submit("script", ["a-op"])
        a.advance()
        b = SimulatedScheduler(path)
        assert b.status("a-op") is SchedulerStatus.active
        assert b.scripts[cid] == "script"
        assert b.submit("s", ["c"]) == "sim-2"


class TestDetect:
    def test_fallback_is_simulated(self):
        assert isinstance(detect_scheduler({}, which=lambda c: None), SimulatedScheduler)

    def test_probe(self):
        found = {"sbatch", "squeue"}
        sched = detect_scheduler({}, which=lambda c: c if c in found else None)
        assert isinstance(sched, TemplateScheduler) and sched.dialect is SLURM

    def test_partial_probe_ignored(self):
        sched = detect_scheduler({}, which=lambda c: c if c == "qsub" else None)
        assert isinstance(sched, SimulatedScheduler)

    def test_env_and_override(self):
        sched = detect_scheduler({"DATASPACE_SCHEDULER": "torque"}, which=lambda c: None)
        assert sched.dialect is TORQUE
        sched = detect_scheduler({"DATASPACE_SCHEDULER": "torque"}, override="simulated")
        assert isinstance(sched, SimulatedScheduler)

    def test_custom_probes(self):
        sched = detect_scheduler({}, probes={"torque": ("fake",)}, which=lambda c: "/bin/" + c)
        assert sched.dialect is TORQUE

    def test_unknown(self):
        with pytest.raises(SchedulerError):
            detect_scheduler({}, override="lsf")


def test_template_refuses_live_submission():
    with pytest.raises(SchedulerError):
        SlurmTemplate().submit("x", ["a"])


def test_status_store_roundtrip(tmp_path):
    store = StatusStore(tmp_path)
    assert store.load() == {}
    store.save({"a-op": {"cluster_job_id": "sim-1", "last_status": "queued"}})
    assert StatusStore(tmp_path).load()["a-op"]["cluster_job_id"] == "sim-1"
