import numpy as np
import pytest

from lattice_gibbs import GaussianParams, build_basis


@pytest.fixture
def basis2d():
    return build_basis([[1.0, 0.5], [0.0, 1.1]])


@pytest.fixture
def basis3d():
    return build_basis([[1.0, 0.5, 0.25], [0.0, 1.1, 0.55], [0.0, 0.0, 1.2]])


@pytest.fixture
def params2d():
    return GaussianParams(1.0, np.array([0.3, -0.2]))
