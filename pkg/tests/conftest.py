import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("lab", max_examples=40, deadline=None)
settings.load_profile("lab")

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if rep.passed else "FAIL"
    if number not in _CRITERIA or status == "FAIL":
        _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"[{status}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f" | {detail}" if detail else ""))
