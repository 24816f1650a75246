"""Empirical metric distribution function via row-wise ranking.

The n x n EMDF matrix has entries F_ij = r_ij / n where r_ij counts the sample
points inside the closed ball centered at X_i with radius d(X_i, X_j):

    r_ij = #{k : d_ik <= d_ij}.

Ranking each row of the distance matrix costs O(n log n), so the whole pipeline
is O(n^2 log n).  Ties within a row share the maximal rank of their tie group,
which keeps the fast path exactly equal to the direct counting definition.
Ranks are stored as integers; EMDF values are derived on demand.

:func:`emdf_naive` is the O(n^3) direct-count oracle used to cross-check the
ranking implementation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .spaces import Space, pairwise_distances


def validate_distance_matrix(dist: np.ndarray) -> np.ndarray:
    """Check square shape, symmetry, nonnegativity and zero diagonal."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {dist.shape}")
    if dist.shape[0] < 1:
        raise ValueError("distance matrix must be at least 1 x 1")
    if not np.array_equal(dist, dist.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diagonal(dist) != 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(dist < 0.0) or not np.all(np.isfinite(dist)):
        raise ValueError("distances must be finite and nonnegative")
    return dist


def rank_matrix(dist: np.ndarray) -> np.ndarray:
    """Row-wise closed-ball counts r_ij = #{k : d_ik <= d_ij} as int64.

    Each row is sorted once and looked up with a right-sided binary search,
    so tied distances receive the count of the whole tie group.
    """
    dist = validate_distance_matrix(dist)
    n = dist.shape[0]
    ranks = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        row_sorted = np.sort(dist[i])
        ranks[i] = np.searchsorted(row_sorted, dist[i], side="right")
    return ranks


def emdf_matrix(space: Space, points, threads: int = 1) -> np.ndarray:
    """EMDF matrix F_ij = r_ij / n of a sample; O(n^2 log n) total."""
    dist = pairwise_distances(space, points, threads=threads)
    return rank_matrix(dist) / dist.shape[0]


def emdf_at(space: Space, points, u, v) -> float:
    """Fraction of the sample inside the closed ball around ``u`` through ``v``.

    Returns n^{-1} #{i : d(u, X_i) <= d(u, v)}; when ``u`` and ``v`` are sample
    points this agrees with the corresponding :func:`emdf_matrix` entry.
    """
    points = list(points)
    if len(points) < 1:
        raise ValueError("need at least one point")
    dists = space.distances_from(u, points)
    radius = space.distance(u, v)
    return float(np.count_nonzero(dists <= radius)) / len(points)


def emdf_naive(space: Space, points) -> np.ndarray:
    """Direct-count O(n^3) evaluation of the EMDF; the test oracle."""
    dist = pairwise_distances(space, points)
    n = dist.shape[0]
    out = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        row = dist[i]
        out[i] = (row[None, :] <= row[:, None]).sum(axis=1)
    return out / n


def dump_matrices(dist: np.ndarray, ranks: np.ndarray, directory) -> list[Path]:
    """Write the distance and rank matrices as CSV for debugging."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dist_path = directory / "distance_matrix.csv"
    rank_path = directory / "rank_matrix.csv"
    np.savetxt(dist_path, dist, delimiter=",", fmt="%.17g")
    np.savetxt(rank_path, ranks, delimiter=",", fmt="%d")
    return [dist_path, rank_path]
