import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> [title, outcomes]
_ACCEPTANCE: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, [title, []])
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry[1].append("skip" if report.skipped else ("pass" if report.passed else "fail"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcomes = _ACCEPTANCE[number]
        if "fail" in outcomes:
            status = "FAIL"
        elif outcomes and all(o == "pass" for o in outcomes):
            status = "PASS"
        else:
            status = "SKIP"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title} ({len(outcomes)} check(s))")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

