import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from broken_sobolev.mesh_core import build_mesh
from broken_sobolev.mesh_gen import l_shape_uniform, refine_red, unit_square_uniform

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def two_cell_square():
    """Unit square split by the (0,0)-(1,1) diagonal."""
    return build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])


@pytest.fixture(scope="session")
def square2():
    return unit_square_uniform(2)


@pytest.fixture(scope="session")
def square4():
    return unit_square_uniform(4)


@pytest.fixture(scope="session")
def square_level3():
    mesh = unit_square_uniform(2)
    for _ in range(3):
        mesh = refine_red(mesh)
    return mesh


@pytest.fixture(scope="session")
def lshape2():
    return l_shape_uniform(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
