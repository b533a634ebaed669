import numpy as np
import pytest

from gossipdda.data import generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(3, 4, 300, separation=3.0, seed=1)
