import os
import sys
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


@pytest.fixture
def data_dir():
    return DATA


def _live_available():
    from stacksurgeon import perf
    from stacksurgeon.workload import compiler

    if perf.syscall_number() is None:
        return "no perf_event_open on this platform"
    if compiler() is None:
        return "no C compiler for the workload"
    try:
        fd = perf.perf_event_open(perf.build_attr(perf.PERF_COUNT_SW_TASK_CLOCK, 10**7, 16),
                                  os.getpid(), -1)
    except OSError as e:
        return f"perf_event_open refused: {e}"
    os.close(fd)
    return None


@pytest.fixture(scope="session")
def busyloop(tmp_path_factory):
    reason = _live_available()
    if reason:
        pytest.skip(reason)
    from stacksurgeon.workload import build_busyloop

    return build_busyloop(tmp_path_factory.mktemp("workload"))


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        if call.excinfo is None:
            outcome = "PASS"
        elif call.excinfo.errisinstance(pytest.skip.Exception):
            outcome = "SKIP"
        else:
            outcome = "FAIL"
        prev = _criteria.get(number, (title, "PASS"))[1]
        rank = {"FAIL": 2, "SKIP": 1, "PASS": 0}
        _criteria[number] = (title, outcome if rank[outcome] >= rank[prev] else prev)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcome = _criteria[number]
        terminalreporter.write_line(f"{outcome}  criterion {number:2d}: {title}")
