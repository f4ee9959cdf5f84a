import numpy as np
import pytest

from fembem_uq.geometry import DEFAULT_PERTURBATION


@pytest.fixture
def zero_sample():
    return np.zeros(DEFAULT_PERTURBATION.dimension)


@pytest.fixture
def random_sample():
    rng = np.random.default_rng(7)
    return rng.uniform(-0.5, 0.5, DEFAULT_PERTURBATION.dimension)
