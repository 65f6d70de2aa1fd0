import numpy as np
import pytest

from reflected_mmbm import MmbmModel, random_model


@pytest.fixture
def scalar():
    """Single Brownian state with unit variance and drift -1."""
    return MmbmModel([[0.0]], [-1.0], [1.0])


@pytest.fixture
def fluid2():
    """Two linear states: up at rate 1, down at rate 1, switching at rates 1 and 2."""
    return MmbmModel([[-1.0, 1.0], [2.0, -2.0]], [1.0, -1.0], [0.0, 0.0])


@pytest.fixture
def three():
    return MmbmModel([[-1.0, 0.6, 0.4], [0.5, -1.2, 0.7], [0.3, 0.9, -1.2]],
                     [1.0, -1.5, 0.3], [0.5, 1.0, 2.0], ("up", "down", "idle"))


@pytest.fixture
def mixed():
    """Diffusive, linear and frozen states together."""
    return MmbmModel([[-2.0, 1.0, 1.0, 0.0], [1.0, -1.5, 0.0, 0.5], [0.5, 0.5, -1.5, 0.5], [1.0, 0.0, 1.0, -2.0]],
                     [0.4, 0.8, 0.0, -1.2], [1.0, 0.0, 0.0, 0.0])


def random_models(seed, count, n_max=5, **kw):
    rng = np.random.default_rng(seed)
    return [random_model(rng, int(rng.integers(1, n_max + 1)), **kw) for _ in range(count)]
