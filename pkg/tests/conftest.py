import numpy as np
import pytest

from qadvect.grid import Boundary, make_grid
from qadvect.operator import SparseOperator


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def channel16():
    return make_grid(16, 16, Boundary.PERIODIC, Boundary.WALL)


def random_operator(rng, n, density=0.3, scale=1.0):
    """Dense-ish random real operator wrapped as a SparseOperator."""
    m = rng.normal(size=(n, n)) * scale
    m[rng.random((n, n)) > density] = 0.0
    return SparseOperator(m + np.eye(n))


def unit(rng, n):
    x = rng.normal(size=n)
    return x / np.linalg.norm(x)
