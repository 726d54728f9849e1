"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
        errors = [ln[1:].strip() for ln in report.longreprtext.splitlines() if ln.startswith("E ")]
        entry["detail"] = errors[0] if errors else ""
    for name, value in report.user_properties:
        if name == "summary":
            entry.setdefault("summaries", []).append(value)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] else "FAIL"
        line = f"criterion {number}: {status}  {entry['title']}"
        for s in entry.get("summaries", []):
            line += f"  [{s}]"
        terminalreporter.write_line(line)
        if not entry["passed"] and entry["detail"]:
            terminalreporter.write_line(f"    {entry['detail']}")
