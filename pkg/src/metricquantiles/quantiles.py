"""Local and global empirical metric quantiles, ranks, signs, depth.

Local concepts order the sample by its empirical distribution level seen from a
fixed anchor point u: level_i = F_n(u, X_i).  Global concepts aggregate the
levels over all anchors into the vector

    J_n(X_j) = n^{-1} sum_i F_n(X_i, X_j)   (column means of the EMDF matrix)

and order the sample by the empirical distribution of J_n.  The empirical
metric median is the 0th global quantile, i.e. the sample argmin of J_n, and
its finite-sample breakdown point is bounded below by
(1 - J_n(median)) / (2 - J_n(median)).

All argmin ties are broken by the smallest original sample index so results are
reproducible.  A :class:`QuantileEngine` caches the distance matrix, integer
rank matrix and sorted J values; it is read-only after construction and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .emdf import rank_matrix
from .spaces import Space, pairwise_distances

DEGENERATE_J_SPREAD = 1e-12


@dataclass(frozen=True)
class QuantileResult:
    """A selected quantile: sample index (None when the anchor itself is
    returned), the point, and the empirical level it attains."""

    index: int | None
    point: object
    achieved_level: float


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {tau}")
    return tau


def _select_min_level(levels: np.ndarray, tau: float) -> int:
    """Smallest-index argmin of ``levels`` subject to ``levels >= tau``."""
    candidates = np.flatnonzero(levels >= tau)
    if candidates.size == 0:
        # cannot happen for valid tau <= 1: the maximal level is always 1
        raise ValueError(f"no sample point attains level {tau}")
    return int(candidates[np.argmin(levels[candidates])])


class QuantileEngine:
    """Cached EMDF pipeline over one sample.

    Parameters
    ----------
    space : Space
        Metric space of the sample.
    points : sequence
        Sample points; validated on construction.
    threads : int
        Row-parallelism for the distance matrix.
    """

    def __init__(self, space: Space, points, threads: int = 1):
        self.space = space
        self.points = list(points)
        self.n = len(self.points)
        self.distances = pairwise_distances(space, self.points, threads=threads)
        self.ranks = rank_matrix(self.distances)
        # column sums of the integer rank matrix: J_n(X_j) = colsum_j / n^2
        self._col_sums = self.ranks.sum(axis=0, dtype=np.int64)
        self._sorted_col_sums = np.sort(self._col_sums)
        self._sorted_rows = np.sort(self.distances, axis=1)

    @cached_property
    def j_values(self) -> np.ndarray:
        """J_n at each sample point (column means of the EMDF matrix)."""
        return self._col_sums / float(self.n * self.n)

    @cached_property
    def global_ranks(self) -> np.ndarray:
        """Global metric ranks R_j = #{i : J_n(X_i) <= J_n(X_j)}."""
        return np.searchsorted(self._sorted_col_sums, self._col_sums, side="right")

    @cached_property
    def global_permutation_ranks(self) -> np.ndarray:
        """Global ranks forced to a permutation of 1..n.

        Identical to :attr:`global_ranks` when the J_n values are distinct;
        ties (possible since J_n values are integer rank sums over n^2) are
        broken by the smaller sample index taking the smaller rank.  Rank
        statistics require permutation input.
        """
        order = np.argsort(self._col_sums, kind="stable")
        ranks = np.empty(self.n, dtype=np.int64)
        ranks[order] = np.arange(1, self.n + 1)
        return ranks

    @cached_property
    def global_levels(self) -> np.ndarray:
        """Empirical distribution levels of J_n at the sample points."""
        return self.global_ranks / self.n

    @cached_property
    def global_signs(self) -> np.ndarray:
        """Half-sample membership signs derived from the global ranks."""
        return np.sign(2 * self.global_ranks - (self.n + 1))

    @property
    def is_degenerate(self) -> bool:
        """True when J_n is constant to 1e-12, the uniform case in which global
        quantiles carry no information and local quantiles should be used."""
        j = self.j_values
        return float(j.max() - j.min()) < DEGENERATE_J_SPREAD

    def f_jn(self, y: float) -> float:
        """Empirical distribution function of the J_n values at ``y``."""
        sorted_j = np.sort(self.j_values)
        return float(np.searchsorted(sorted_j, y, side="right")) / self.n

    def global_quantile(self, tau: float) -> QuantileResult:
        """Sample point whose J_n-level first reaches ``tau``; smallest index
        wins ties."""
        tau = _check_tau(tau)
        idx = _select_min_level(self.global_levels, tau)
        return QuantileResult(idx, self.points[idx], float(self.global_levels[idx]))

    def metric_median(self) -> QuantileResult:
        """The 0th global quantile: the sample argmin of J_n."""
        return self.global_quantile(0.0)

    def breakdown_lower_bound(self) -> float:
        """Lower bound of the median's finite-sample breakdown point.

        Equals (1 - J_n(median)) / (2 - J_n(median)), computed from integer
        rank sums as (n^2 - S) / (2 n^2 - S) with S the minimal column sum.
        """
        s = int(self._col_sums.min())
        nsq = self.n * self.n
        return (nsq - s) / (2 * nsq - s)

    def j_at(self, u) -> float:
        """J_n evaluated at an arbitrary point ``u`` of the space.

        For ``u`` equal to a sample point this matches the ``j_values`` entry
        (bit-exactly for the exactly-symmetric metric implementations).
        """
        dists = self.space.distances_from(u, self.points)
        total = 0
        for i in range(self.n):
            total += int(np.searchsorted(self._sorted_rows[i], dists[i], side="right"))
        return total / float(self.n * self.n)

    def empirical_depth(self, u) -> float:
        """Metric depth 1 - F_Jn(J_n(u)); larger is more central."""
        return 1.0 - self.f_jn(self.j_at(u))

    def local_levels(self, u) -> np.ndarray:
        """EMDF levels F_n(u, X_i) of the sample seen from anchor ``u``."""
        return self.local_ranks(u) / self.n

    def local_ranks(self, u) -> np.ndarray:
        """Local metric ranks n F_n(u, X_i) as integers."""
        dists = self.space.distances_from(u, self.points)
        return _counts_leq(dists)

    def local_signs(self, u) -> np.ndarray:
        return np.sign(2 * self.local_ranks(u) - (self.n + 1))

    def local_quantile(self, u, tau: float) -> QuantileResult:
        """Local quantile at anchor ``u``; for tau < 1/n the anchor itself is
        returned with level 0."""
        tau = _check_tau(tau)
        if tau < 1.0 / self.n:
            return QuantileResult(None, u, 0.0)
        levels = self.local_levels(u)
        idx = _select_min_level(levels, tau)
        return QuantileResult(idx, self.points[idx], float(levels[idx]))


def _counts_leq(values: np.ndarray) -> np.ndarray:
    """For each entry, how many entries are <= it (maximal rank under ties)."""
    ordered = np.sort(values)
    return np.searchsorted(ordered, values, side="right")


def local_quantile(space: Space, points, u, tau: float) -> QuantileResult:
    """Local empirical quantile at anchor ``u`` without building a full engine."""
    points = list(points)
    tau = _check_tau(tau)
    n = len(points)
    if n < 1:
        raise ValueError("need at least one point")
    if tau < 1.0 / n:
        return QuantileResult(None, u, 0.0)
    levels = _counts_leq(space.distances_from(u, points)) / n
    idx = _select_min_level(levels, tau)
    return QuantileResult(idx, points[idx], float(levels[idx]))


def local_ranks(space: Space, points, u) -> np.ndarray:
    """Local metric ranks of the sample relative to anchor ``u``."""
    return _counts_leq(space.distances_from(u, list(points)))


def local_signs(space: Space, points, u) -> np.ndarray:
    """Local metric signs: sign(rank/(n+1) - 1/2) with sign(0) = 0."""
    ranks = local_ranks(space, points, u)
    return np.sign(2 * ranks - (len(ranks) + 1))


def j_values(space: Space, points, threads: int = 1) -> np.ndarray:
    return QuantileEngine(space, points, threads=threads).j_values


def j_at(space: Space, points, u) -> float:
    return QuantileEngine(space, points).j_at(u)


def global_quantile(space: Space, points, tau: float) -> QuantileResult:
    return QuantileEngine(space, points).global_quantile(tau)


def global_ranks(space: Space, points, threads: int = 1) -> np.ndarray:
    return QuantileEngine(space, points, threads=threads).global_ranks


def global_signs(space: Space, points) -> np.ndarray:
    return QuantileEngine(space, points).global_signs


def metric_median(space: Space, points) -> QuantileResult:
    return QuantileEngine(space, points).metric_median()


def empirical_depth(space: Space, points, u) -> float:
    return QuantileEngine(space, points).empirical_depth(u)


def breakdown_lower_bound(space: Space, points) -> float:
    return QuantileEngine(space, points).breakdown_lower_bound()
