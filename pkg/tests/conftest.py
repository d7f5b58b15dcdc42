"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion at the end of the run."""

import pytest

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker.args
        entry = _outcomes.setdefault(number, {"title": title, "parts": []})
        entry["parts"].append((item.name, report.outcome == "passed"))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes, key=int):
        entry = _outcomes[number]
        ok = all(p for _, p in entry["parts"])
        failed = [name for name, p in entry["parts"] if not p]
        line = f"{'PASS' if ok else 'FAIL'}  {number:>2}  {entry['title']}"
        if failed:
            line += f"  (failing: {', '.join(failed)})"
        terminalreporter.write_line(line)
