import numpy as np
import pytest

from koopquad.dynamics import RigidBodyParams

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    return RigidBodyParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
