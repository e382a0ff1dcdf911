import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdcs.presets import cameraman_gmd, ggd_anchor, gmd_anchor

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def gmd():
    return gmd_anchor()


@pytest.fixture(scope="session")
def ggd():
    return ggd_anchor()


@pytest.fixture(scope="session")
def cameraman():
    return cameraman_gmd()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------------
# Tests marked ``criterion(number, title)`` are aggregated into one line per
# criterion at the end of the run.

_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[int, list[bool]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    if report.when == "call" or report.failed or report.skipped:
        num = _criteria[report.nodeid][0]
        _outcomes.setdefault(num, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    titles = {num: title for num, title in _criteria.values()}
    terminalreporter.section("acceptance criteria")
    for num in sorted(titles):
        results = _outcomes.get(num)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status:7s} {titles[num]}")
