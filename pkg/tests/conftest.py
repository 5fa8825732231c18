import numpy as np
import pytest

from anosov_lab.sphere import SphericalCircle, validate_table
from anosov_lab.tables import gen_platonic_table


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ico55():
    return gen_platonic_table("icosahedron", 0.55)


@pytest.fixture(scope="session")
def ico50():
    return gen_platonic_table("icosahedron", 0.5)


@pytest.fixture(scope="session")
def three_table():
    return validate_table(SphericalCircle(np.eye(3)[k], 0.3) for k in range(3))


@pytest.fixture(scope="session")
def two_table():
    return validate_table([SphericalCircle(np.array([0, 0, 1.0]), 0.5),
                           SphericalCircle(np.array([0, 0, -1.0]), 0.5)])
