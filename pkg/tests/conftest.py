import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num = marker.args[0]
    if report.when == "call" or report.outcome != "passed":
        detail = dict(item.user_properties).get("detail", "")
        prev = _acceptance.get(num, (True, "", ""))
        _acceptance[num] = (prev[0] and report.outcome == "passed", item.name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        ok, name, detail = _acceptance[num]
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
