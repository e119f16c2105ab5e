"""Collects ``criterion`` marks and prints one PASS/FAIL line per acceptance criterion."""
from collections import OrderedDict

import pytest

_results: "OrderedDict[int, dict]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _results.setdefault(number, {"title": title, "passed": 0, "failed": [], "skipped": 0})
    if report.when == "call":
        if report.passed:
            entry["passed"] += 1
        elif report.failed:
            entry["failed"].append(item.name)
        else:
            entry["skipped"] += 1
    elif report.failed:
        entry["failed"].append(f"{item.name} ({report.when})")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        ok = entry["passed"] > 0 and not entry["failed"]
        status = "PASS" if ok else "FAIL"
        detail = f"{entry['passed']} checks passed"
        if entry["failed"]:
            detail += f"; failed: {', '.join(entry['failed'])}"
        if entry["skipped"]:
            detail += f"; {entry['skipped']} skipped"
        terminalreporter.write_line(f"criterion {number:>2} {status}  {entry['title']}  ({detail})")
