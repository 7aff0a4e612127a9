import numpy as np
import pytest

ENVELOPE = "series(diode(Is=1e-14, n=1, VT=0.02585), parallel(resistor(R=1), capacitor(C=1)))"
THREE = "series(resistor(R=1), parallel(resistor(R=1), rc(R=1, C=0.001953125)))"
POTASSIUM = "parallel(resistor(R=500), memristor(gK=19, vK=12))"


def ladder_netlist(n: int) -> str:
    """``n`` diode/RC units; each unit wraps the previous one in parallel with its filter."""
    d, rc = "diode(Is=1e-14, n=1, VT=0.02585)", "rc(R=1, C=1)"
    node = f"series({d}, {rc})"
    for _ in range(n - 1):
        node = f"series({d}, parallel({rc}, {node}))"
    return node


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def report(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
