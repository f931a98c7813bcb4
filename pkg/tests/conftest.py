import math
from pathlib import Path

import pytest

from rydsim import gates

DATA = Path(__file__).parent / "data"
TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def cz_params():
    return gates.solve_cz_parameters()


@pytest.fixture(scope="session")
def data_dir():
    return DATA


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion.

    Call the returned function with the criterion number, a title, the
    outcome and a short detail string; the line is printed immediately and
    repeated in the terminal summary.
    """

    def record(number: int, title: str, ok: bool, detail: str, seconds: float) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail}; {seconds:.2f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
