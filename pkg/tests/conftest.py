import math

import numpy as np
import pytest


def cos_fractional_factor(sigma: float, terms: int = 40) -> float:
    """``2 * int_0^1 (cos z - 1) z^(-1-sigma) dz`` from its power series."""
    return 2.0 * sum((-1) ** k / (math.factorial(2 * k) * (2 * k - sigma)) for k in range(1, terms))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        CRITERIA[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(CRITERIA[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
