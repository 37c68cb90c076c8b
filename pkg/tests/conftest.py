from __future__ import annotations

from pathlib import Path

import pytest

from retrofit_ml.synthetic import bundled_dir

_OUTCOMES: dict[int, tuple[str, str]] = {}
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    _TITLES[number] = title
    if report.skipped:
        status = "SKIP"
    elif report.failed:
        status = "FAIL"
    elif report.when == "call":
        status = "PASS"
    else:
        return
    previous = _OUTCOMES.get(number, ("PASS", ""))[0]
    # a criterion spread over several tests passes only if all of them do
    if previous == "FAIL" or (previous == "SKIP" and status == "PASS"):
        status = previous
    _OUTCOMES[number] = (status, item.name)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status, _ = _OUTCOMES[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {_TITLES[number]}")


@pytest.fixture(scope="session")
def synthetic_csv() -> Path:
    return bundled_dir() / "synthetic_500.csv"


@pytest.fixture(scope="session")
def synthetic_config() -> Path:
    return bundled_dir() / "synthetic.json"
