import numpy as np
import pytest

from bdsdelab.grids import make_uniform_grid
from bdsdelab.noise import NoiseConfig, generate


@pytest.fixture(scope="session")
def small_grid():
    return make_uniform_grid(1.0, 20)


@pytest.fixture(scope="session")
def small_bundle(small_grid):
    """Tiny cloud for structural tests; too small for tight statistics."""
    return generate(small_grid, NoiseConfig(seed=7, m_outer=3, n_inner=50))


@pytest.fixture(scope="session")
def medium_bundle():
    grid = make_uniform_grid(1.0, 50)
    return generate(grid, NoiseConfig(seed=11, m_outer=4, n_inner=800))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240824)
