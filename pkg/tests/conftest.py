"""Acceptance reporting: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_RESULTS = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    prev = _RESULTS.get(number, (title, True))
    _RESULTS[number] = (title, prev[1] and report.passed)


@pytest.fixture
def criterion_log(request):
    """``log(text)`` attaches a measured value to the current criterion's summary line."""
    number = request.node.get_closest_marker("criterion").args[0]

    def log(text):
        _DETAILS.setdefault(number, []).append(text)

    return log


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
        for text in _DETAILS.get(number, []):
            terminalreporter.write_line(f"    {text}")
