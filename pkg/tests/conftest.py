import math

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def within_sigmas(observed: float, p: float, n: int, k: float = 3.0) -> bool:
    return abs(observed - p) <= k * binomial_sigma(p, n) + 1e-12


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
