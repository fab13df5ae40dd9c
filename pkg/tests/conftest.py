import numpy as np
import pytest

from optrot.elasticity import DensityParams, TractionProblem
from optrot.forces import tangential_2d, uniform_tension
from optrot.mesh import unit_ball, unit_square

SEEDS = (1, 2, 3)


@pytest.fixture(params=SEEDS)
def rng(request):
    return np.random.default_rng(request.param)


@pytest.fixture(scope="session")
def square8():
    return unit_square(8)


@pytest.fixture(scope="session")
def square32():
    return unit_square(32)


@pytest.fixture(scope="session")
def ball2():
    return unit_ball(2)


@pytest.fixture(scope="session")
def tension8(square8):
    return TractionProblem(square8, uniform_tension(square8), DensityParams(1.0, 1.0))


@pytest.fixture(scope="session")
def tension32(square32):
    return TractionProblem(square32, uniform_tension(square32), DensityParams(1.0, 1.0))


@pytest.fixture(scope="session")
def tangential8(square8):
    return TractionProblem(square8, tangential_2d(square8), DensityParams(1.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
