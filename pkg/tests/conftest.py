"""Per-criterion pass/fail lines for the acceptance suite."""

from collections import OrderedDict

import pytest

_outcomes: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _outcomes.setdefault(number, {"title": title, "ok": True, "details": []})
    entry["ok"] &= not rep.failed
    details = [v for k, v in item.user_properties if k == "detail"]
    if rep.when == "call":
        entry["details"].extend(details)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        tr.write_line(f"criterion {number}: {status}  {e['title']}" + (f"  [{detail}]" if detail else ""))
