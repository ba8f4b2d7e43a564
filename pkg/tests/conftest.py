import sys
from pathlib import Path

import pytest

from dataspace import init_project

sys.path.insert(0, str(Path(__file__).parent))

IDEAL_GAS_PRESSURES = (0.1, 1.0, 10.0)


def ideal_gas_sp(p):
    return {"p": p, "N": 1000, "kT": 1.0}


@pytest.fixture
def project(tmp_path):
    return init_project("TestProject", tmp_path)


@pytest.fixture
def ideal_gas(project):
    for p in IDEAL_GAS_PRESSURES:
        project.open_job(ideal_gas_sp(p)).init()
    return project


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.call_report = rep
