"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.skipped:
        return
    if rep.when == "call" or rep.failed:
        number, title = mark.args
        measured = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
        _results[number] = ("PASS" if rep.passed else "FAIL", title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        status, title, measured = _results[number]
        line = f"{status} criterion {number:>2}: {title}"
        terminalreporter.write_line(f"{line} [{measured}]" if measured else line)
