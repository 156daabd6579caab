import math

import numpy as np
import pytest

from radius_lab import systems

LAMBDA = (3 + math.sqrt(5)) / 2
LOG_LAMBDA = math.log(LAMBDA)


@pytest.fixture(scope="session")
def cat():
    return systems.cat_map()


@pytest.fixture(scope="session")
def shear05():
    return systems.shear(0.05)


@pytest.fixture(scope="session")
def shear10():
    return systems.shear(0.1)


@pytest.fixture(scope="session")
def da():
    return systems.derived_from_anosov(0.7, radius=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
