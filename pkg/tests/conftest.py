import numpy as np
import pytest

from grdr import covmodel


@pytest.fixture
def rotated_spec():
    def make(d, gamma=-2.0, seed=0):
        return covmodel.make_eigen_decay(d, gamma, 1.0, covmodel.RANDOM_ROTATION, seed)
    return make


def random_gram(d, seed, rank=None):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((d, rank or d))
    return b @ b.T
