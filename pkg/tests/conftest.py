"""Collects acceptance-criterion outcomes and prints one line per criterion."""
from collections import OrderedDict

_RESULTS: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    number, title = marker
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "ran": False, "details": []})
    if report.when == "call" or report.outcome != "passed":
        entry["ran"] = entry["ran"] or report.when == "call"
        entry["ok"] = entry["ok"] and report.outcome == "passed"
    if report.when == "call":
        entry["details"] += [v for k, v in report.user_properties if k == "detail"]


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            item.user_properties.append(("acceptance", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        detail = "; ".join(e["details"])
        tr.write_line(f"[{status}] {number:2d}. {e['title']}" + (f" -- {detail}" if detail else ""))
