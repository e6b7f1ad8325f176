# Acceptance tests tag themselves with record_property("criterion", n); the
# summary prints one status line per criterion.
_criteria = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call":
        if report.passed:
            status = "PASS"
        elif report.skipped:
            status = "SKIP"
            if not props.get("detail") and isinstance(report.longrepr, tuple):
                props["detail"] = report.longrepr[2].removeprefix("Skipped: ")
        else:
            status = "FAIL"
        _criteria[props["criterion"]] = (status, props.get("title", ""), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title, detail = _criteria[n]
        line = f"criterion {n}: {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
