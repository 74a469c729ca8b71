import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240717)


def random_unit_spins(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def random_spins(rng, n, radius_range=(0.5, 2.0)):
    radii = rng.uniform(*radius_range, size=(n, 1))
    return random_unit_spins(rng, n) * radii


def central_difference_gradient(value_fn, arr, h=1e-6):
    """Independent gradient oracle: central differences of a scalar field."""
    grad = np.zeros_like(arr)
    for i in range(arr.shape[0]):
        for j in range(3):
            plus = arr.copy()
            minus = arr.copy()
            plus[i, j] += h
            minus[i, j] -= h
            grad[i, j] = (value_fn(plus) - value_fn(minus)) / (2.0 * h)
    return grad
