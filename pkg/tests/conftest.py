"""Print one pass/fail line per acceptance criterion at the end of a run."""

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name]
        word = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{word}  {name}")
