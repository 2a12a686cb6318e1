import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from _acceptance_log import RESULTS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    seen = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name and rep.when == "call" or (
                    key == "error" and "test_criterion_" in name):
                n = int(name.split("test_criterion_")[1][:2])
                seen[n] = key == "passed"
    if not seen:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(seen):
        _, detail = RESULTS.get(n, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if seen[n] else 'FAIL'}  {detail}")
