"""Collects acceptance outcomes and prints one line per criterion at the end."""

from collections import OrderedDict

import pytest

_OUTCOMES = OrderedDict()
_SETUP_TIME = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "setup":
        _SETUP_TIME[item.nodeid] = report.duration
    if report.when == "call" or (report.when == "setup" and (report.skipped or report.failed)):
        criterion = marker.kwargs["criterion"]
        clause = marker.kwargs.get("clause", "")
        if not clause and hasattr(item, "callspec"):
            clause = ", ".join(str(v) for v in item.callspec.params.values())
        if report.skipped:
            status = "SKIP"
        else:
            status = "PASS" if report.passed else "FAIL"
        note = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            note = report.longrepr[2]
        _OUTCOMES.setdefault(criterion, {"title": marker.kwargs.get("title", ""), "clauses": []})
        _OUTCOMES[criterion]["clauses"].append((clause, status, note, f"{report.duration + _SETUP_TIME.get(item.nodeid, 0.0):.1f}s"))


def _combine(statuses):
    if "FAIL" in statuses:
        return "FAIL"
    if all(s == "SKIP" for s in statuses):
        return "SKIP"
    return "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for criterion in sorted(_OUTCOMES, key=int):
        entry = _OUTCOMES[criterion]
        clauses = entry["clauses"]
        status = _combine([c[1] for c in clauses])
        note = next((c[2] for c in clauses if c[2]), "")
        tr.write_line(f"criterion {criterion}: {status}  {entry['title']}" + (f"  ({note})" if note else ""))
        if len(clauses) > 1:
            for clause, st, _, dur in clauses:
                tr.write_line(f"    {st:<4}  {clause}  [{dur}]")
