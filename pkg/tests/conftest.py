import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

# criterion number -> detail line, filled in by test_acceptance.py
ACCEPTANCE_DETAILS = {}

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m is None or (key == "passed" and rep.when != "call"):
                continue
            num = int(m.group(1))
            if key != "passed" or num not in outcomes:
                outcomes[num] = "PASS" if key == "passed" else "FAIL"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcomes):
        detail = ACCEPTANCE_DETAILS.get(num, "")
        terminalreporter.write_line(f"criterion {num:2d}: {outcomes[num]}  {detail}".rstrip())
