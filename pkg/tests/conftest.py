import re
from collections import OrderedDict

_results = OrderedDict()


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    k = int(m.group(1))
    entry = _results.setdefault(k, {"ok": True, "details": []})
    if report.failed or report.skipped:
        entry["ok"] = False
    for key, val in report.user_properties:
        if key == "detail" and report.when == "call":
            entry["details"].append(val)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_results):
        e = _results[k]
        tag = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {tag}  " + "; ".join(e["details"]))
