import numpy as np
import pytest

from cosymplectic import quantum
from cosymplectic.core import ScalarField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, dim, count, scale=1.0):
    return [np.concatenate([[rng.uniform(-2, 2)], scale * rng.normal(size=dim - 1)]) for _ in range(count)]


def random_polynomial(rng, n, degree=3, terms=6):
    """Random polynomial field in (t, q, p) built from monomials."""
    dim = 2 * n + 1
    monos = [(rng.normal(), rng.integers(0, degree + 1, size=dim) * (rng.random(dim) < 0.5)) for _ in range(terms)]

    def fn(x):
        s = 0.0
        for c, powers in monos:
            term = c
            for xi, k in zip(x, powers):
                for _ in range(int(k)):
                    term = term * xi
            s = s + term
        return s

    return ScalarField(fn, dim, "poly")


def two_level(B=(0, 0, 0, 1), envelope=None):
    path = quantum.HermitianPath.two_level(B, envelope)
    return path, quantum.schrodinger_field(path)
