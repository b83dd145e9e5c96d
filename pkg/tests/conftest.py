import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "round-trip identity",
    2: "piecewise constancy",
    3: "diffusion oracle equivalence",
    4: "weight simplex",
    5: "fixed point",
    6: "refinement improves coarse depth",
    7: "iterations converge",
    8: "seed-ratio degradation",
    9: "replacement ordering",
    10: "confidence ordering",
    11: "b interior minimum",
    12: "metric correctness",
    13: "determinism",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(int(m.group(1)), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num, name in CRITERIA.items():
        if num not in _outcomes:
            continue
        status = "PASS" if all(_outcomes[num]) else "FAIL"
        terminalreporter.write_line(f"C{num:<2} {status}  {name}")
