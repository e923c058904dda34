import math

import pytest

from cvqkd_ir.optics import RngStream

ACCEPTANCE_LINES = []


def var_band(var, n, k=3.0):
    """Half-width of a k-sigma band for a Gaussian sample variance."""
    return k * var * math.sqrt(2.0 / n)


@pytest.fixture
def gen():
    return RngStream(20240601, 0).generator()


@pytest.fixture
def record_criterion():
    """Store a one-line acceptance verdict, printed in the terminal summary."""

    def _record(num, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
