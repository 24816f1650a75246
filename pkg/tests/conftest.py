"""Shared helpers: random point generation for every space kind."""

import numpy as np
import pytest

from metricquantiles.spaces import (EuclideanSpace, GaussianPoint,
                                    GaussianWassersteinSpace, ProductSpace,
                                    SpdSpace, SphereSpace, TreePoint, TreeSpace)


def rand_point(space, rng):
    if isinstance(space, EuclideanSpace):
        return rng.standard_normal(space.dim)
    if isinstance(space, SphereSpace):
        v = rng.standard_normal(space.dim)
        return v / np.linalg.norm(v)
    if isinstance(space, SpdSpace):
        a = rng.standard_normal((space.p, space.p))
        m = a @ a.T + 0.2 * np.eye(space.p)
        return (m + m.T) / 2.0
    if isinstance(space, GaussianWassersteinSpace):
        return GaussianPoint(float(rng.standard_normal()), float(rng.random()) + 0.05)
    if isinstance(space, TreeSpace):
        return TreePoint(int(rng.integers(1, 4)), float(rng.random()))
    if isinstance(space, ProductSpace):
        return tuple(rand_point(c, rng) for c in space.components)
    raise AssertionError(f"unhandled space {space}")


def rand_points(space, n, rng):
    return [rand_point(space, rng) for _ in range(n)]


ALL_SPACES = [
    EuclideanSpace(1),
    EuclideanSpace(3),
    EuclideanSpace(2, q=1.0),
    EuclideanSpace(2, q=3.5),
    SphereSpace(3),
    SpdSpace(2),
    SpdSpace(3),
    GaussianWassersteinSpace(),
    TreeSpace(),
    ProductSpace((EuclideanSpace(2), SphereSpace(3)), p=2.0),
]

# one representative per spec space kind, for per-kind sweeps
KIND_SPACES = [
    EuclideanSpace(3),
    SphereSpace(3),
    SpdSpace(3),
    GaussianWassersteinSpace(),
    TreeSpace(),
    ProductSpace((EuclideanSpace(2), SphereSpace(3)), p=2.0),
]


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
