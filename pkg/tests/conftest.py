from __future__ import annotations

import functools

import pytest

from lindemann.core import Params
from lindemann.manifold import SlowManifold


@functools.lru_cache(maxsize=None)
def slow_manifold(eps: float) -> SlowManifold:
    return SlowManifold.build(Params(eps))


@pytest.fixture(scope="session")
def manifold_of():
    return slow_manifold


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = item.config._criteria.setdefault(number, {"title": title, "passed": True, "detail": ""})
    if report.failed or (report.when == "call" and report.skipped):
        entry["passed"] = False
    for key, value in item.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        c = criteria[number]
        verdict = "PASS" if c["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {c['title']}: {c['detail']}")
