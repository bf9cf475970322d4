import numpy as np
import pytest

from robustsysid.signals import Dataset, make_rng, random_system, toeplitz_regressor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_problem(seed, N=100, n=30, order=10, noise_fraction=0.1, c=0.0):
    """Random identification problem with Gaussian (optionally contaminated) noise."""
    from robustsysid.signals import sample_outlier_noise

    system = random_system(order, seed, n=n)
    u = make_rng(seed, 1).standard_normal(N)
    y0 = toeplitz_regressor(u, n) @ system.g
    sigma2 = noise_fraction * float(np.var(y0))
    v = sample_outlier_noise(sigma2, c, N, seed, (2,))
    return system, Dataset(u, y0 + v), sigma2


@pytest.fixture
def problem():
    return make_problem(3)
