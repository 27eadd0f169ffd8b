import os

import pytest
from hypothesis import settings

settings.register_profile("default", derandomize=True)
settings.register_profile("thorough", max_examples=2000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        doc = (item.function.__doc__ or "").strip().splitlines()
        title = doc[0] if doc else item.name
        if report.nodeid not in _CRITERIA or report.outcome != "passed":
            _CRITERIA[report.nodeid] = (report.outcome, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, title in _CRITERIA.values():
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {title}")
