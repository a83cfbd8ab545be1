from pathlib import Path

import pytest
from hypothesis import settings

from cgda.model import generalize
from cgda.scenario import Scenario, generate_demonstrations

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


@pytest.fixture(scope="session")
def paint_scenario():
    return Scenario.load(SCENARIOS / "paint.yaml")


@pytest.fixture(scope="session")
def iron_scenario():
    return Scenario.load(SCENARIOS / "iron.yaml")


@pytest.fixture(scope="session")
def paint_demos(paint_scenario):
    return generate_demonstrations(paint_scenario)


@pytest.fixture(scope="session")
def iron_demos(iron_scenario):
    return generate_demonstrations(iron_scenario)


@pytest.fixture(scope="session")
def paint_action(paint_scenario, paint_demos):
    return generalize(paint_demos, paint_scenario.t_min, paint_scenario.feature_units)


@pytest.fixture(scope="session")
def iron_action(iron_scenario, iron_demos):
    return generalize(iron_demos, iron_scenario.t_min, iron_scenario.feature_units)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[report.nodeid] = report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_CRITERIA):
        rep = _CRITERIA[nodeid]
        number = int(nodeid.split("test_criterion_")[1][:2])
        detail = dict(rep.user_properties).get("detail", "")
        status = "PASS" if rep.passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
