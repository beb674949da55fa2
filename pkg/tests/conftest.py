import numpy as np
import pytest

from kkf.systems import LinearGaussianSystem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_linear():
    """x+ = 0.9 x + w, y = x + v with q = 0.04, r = 0.09."""
    return LinearGaussianSystem([[0.9]], [[1.0]], [[0.04]], [[0.09]])


@pytest.fixture
def linear3():
    A = np.array([[0.9, 0.1, 0.0], [-0.1, 0.8, 0.05], [0.0, 0.2, 0.7]])
    return LinearGaussianSystem(A, np.eye(2, 3), 0.01 * np.eye(3), 0.01 * np.eye(2))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
