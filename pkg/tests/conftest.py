import pytest

import corpus
from bpmnverify.spin import spin_available

_criteria: dict[int, tuple[str, str]] = {}


def pytest_collection_modifyitems(config, items):
    if spin_available():
        return
    skip = pytest.mark.skip(reason="SPIN not installed (set BPMNVERIFY_SPIN or put spin on PATH)")
    for item in items:
        if "spin" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or report.outcome != "passed":
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if number not in _criteria or _criteria[number][1] == "PASS":
            _criteria[number] = (title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title}")


@pytest.fixture
def m1():
    return corpus.model("m1")


@pytest.fixture
def m2():
    return corpus.model("m2")


@pytest.fixture
def m3():
    return corpus.model("m3")


@pytest.fixture
def m4():
    return corpus.model("m4_loop")
