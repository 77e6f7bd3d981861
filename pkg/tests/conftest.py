import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def pytest_runtest_logreport(report):
    # A criterion that errors before printing its own line still gets one.
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when != "call" or not report.failed or not name.startswith("test_criterion_"):
        return
    number = name.split("_")[2]
    if not any(line.startswith(f"CRITERION {number}:") for line in ACCEPTANCE_LINES):
        ACCEPTANCE_LINES.append(f"CRITERION {number}: FAIL (error) {report.longrepr.reprcrash.message if hasattr(report.longrepr, 'reprcrash') else ''}")
