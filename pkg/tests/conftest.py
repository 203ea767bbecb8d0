from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "40")),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "detail": "", "ran": False})
    if report.when == "call":
        entry["ran"] = True
        entry["ok"] = entry["ok"] and report.passed
        details = [v for k, v in report.user_properties if k == "detail"]
        if details:
            entry["detail"] = "; ".join(details)
    elif report.failed:
        entry["ok"] = False
        entry["detail"] = entry["detail"] or f"{report.when} error"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        line = f"{status} criterion {number}: {entry['title']}"
        if entry["detail"]:
            line += f" | {entry['detail']}"
        terminalreporter.write_line(line)
