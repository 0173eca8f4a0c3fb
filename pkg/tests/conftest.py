import math

import numpy as np
import pytest

from arithrenewal import oracles
from arithrenewal.lattice import ArithmeticLaw

LOG2 = math.log(2.0)


@pytest.fixture
def stp_pair():
    return oracles.st_petersburg_pair()


@pytest.fixture
def two_point():
    # P{log A = h} = 1/3, P{log A = -h} = 2/3
    return ArithmeticLaw.from_atoms(LOG2, {1: 1 / 3, -1: 2 / 3})


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
