import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def random_walk(rng, n, scale=1.0):
    """A rough series with slowly wandering level: a generic solver input."""
    return np.cumsum(rng.normal(0.0, scale, n))
