import numpy as np
import pytest

from infproj.problem import VarianceRegProblem
from infproj.synthetic import make_logistic_data


@pytest.fixture
def small_data():
    return make_logistic_data(20, 6, seed=3)


@pytest.fixture
def small_problem(small_data):
    return VarianceRegProblem(small_data, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
