import numpy as np
import pytest

from geofv.mesh import build_cartesian


@pytest.fixture
def mesh1d():
    """10-cell 1-D mesh on [0, 1]."""
    return build_cartesian(10, 1, 1, (1.0, 1.0, 1.0))


@pytest.fixture
def mesh2d():
    """8x6 2-D mesh on [0, 2] x [0, 1]."""
    return build_cartesian(8, 6, 1, (2.0, 1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
