import sys
import time

START = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
    terminalreporter.write_line(f"suite wall time {time.perf_counter() - START:.1f} s (limit 60 s)")
