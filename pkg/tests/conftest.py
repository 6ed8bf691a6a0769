import numpy as np
import pytest

from bichoquard import Grid, Nonlinearity, ProblemConfig, rescale_mass


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: ground-state solves taking minutes")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(12, 10.0)


@pytest.fixture(scope="session")
def power_cfg(small_grid):
    return ProblemConfig.create(small_grid, mu=2.0, beta=0.5, c=1.0, nl=Nonlinearity.power(4))


def unit_field(grid, rng, **kw):
    return rescale_mass(grid.random(rng, **kw), 1.0)
