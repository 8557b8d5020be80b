import math

import numpy as np
import pytest

from phasewalk import ComSurface, RobotParams, StepSpec, generate_nominal

G = 9.81
W1 = math.sqrt(G)  # omega at unit apex height


def flat_steps(n, length=0.5, speed=0.6, start=0.0):
    return [StepSpec((start + k * length, 0.0, 0.0), ComSurface(0.0, 0.0, 1.0), speed)
            for k in range(n)]


@pytest.fixture(scope="session")
def robot():
    return RobotParams()


@pytest.fixture(scope="session")
def flat8(robot):
    return generate_nominal(flat_steps(8), robot)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end walks (seconds each)")


@pytest.fixture(scope="session")
def small_table(robot):
    """Reference-step table (reference ranges) with its region map."""
    from phasewalk.manifold import BundleSpec
    from phasewalk.recovery import DpParams, dp_build

    step = StepSpec((1.2, 0.0, 0.0), ComSurface(0.0, 0.0, 1.0), 0.6)
    return dp_build(DpParams.table_4_1(W1), step, BundleSpec(), robot, region=True)
