import numpy as np
import pytest

from iwakf.model import discretize_pendulum, shaping_filter


@pytest.fixture(scope="session")
def pendulum():
    return discretize_pendulum()


@pytest.fixture(scope="session")
def sf1():
    return shaping_filter("sf1")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable_gamma(rng, num_scale=2.0):
    """Draw denominator coefficients uniformly from the Jury triangle."""
    g0 = rng.uniform(-0.99, 0.99)
    lim = (1.0 + g0) * 0.99
    g1 = rng.uniform(-lim, lim)
    g2, g3 = rng.normal(0.0, num_scale, size=2)
    return g0, g1, g2, g3
