"""Rank-based independence tests built on global metric ranks.

The engine is the linear rank statistic

    T = sum_i phi1(RX_i / (n+1)) * phi2(RY_i / (n+1))

whose exact null moments under independent uniform rank permutations are

    E(T) = n * mean(a) * mean(b),
    Var(T) = sum_i (a_i - mean(a))^2 * sum_j (b_j - mean(b))^2 / (n - 1),

with a_i = phi1(i/(n+1)) and b_i = phi2(i/(n+1)).  The standardized statistic
W = (T - E(T)) / sqrt(Var(T)) is asymptotically standard normal under the null,
and with identity scores W coincides with the Spearman rank correlation
statistic (up to the usual scaling), for which a closed form is provided.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .quantiles import QuantileEngine
from .spaces import Space


@dataclass(frozen=True)
class ScoreFunction:
    """A score function evaluated on the rank grid i/(n+1), i = 1..n.

    Must be square-integrable on (0, 1) and of bounded variation; the built-in
    choices satisfy this.  ``table`` pins the values instead of a callable, for
    user-supplied tabulated scores.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    table: tuple[float, ...] | None = None

    @staticmethod
    def spearman() -> "ScoreFunction":
        """Identity scores phi(u) = u."""
        return ScoreFunction(name="spearman", fn=lambda u: u)

    @staticmethod
    def from_table(values, name: str = "tabulated") -> "ScoreFunction":
        return ScoreFunction(name=name, table=tuple(float(v) for v in values))

    @staticmethod
    def from_callable(fn: Callable, name: str) -> "ScoreFunction":
        return ScoreFunction(name=name, fn=fn)

    def values(self, n: int) -> np.ndarray:
        """Scores a_i = phi(i/(n+1)) for i = 1..n."""
        if self.table is not None:
            if len(self.table) != n:
                raise ValueError(
                    f"tabulated score has {len(self.table)} entries, sample size is {n}")
            return np.asarray(self.table, dtype=float)
        grid = np.arange(1, n + 1) / (n + 1)
        return np.asarray(self.fn(grid), dtype=float)


def _check_ranks(ranks: np.ndarray, n: int | None = None) -> np.ndarray:
    arr = np.asarray(ranks, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("rank vector must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"rank vector length mismatch: {arr.shape[0]} != {n}")
    if sorted(arr.tolist()) != list(range(1, arr.shape[0] + 1)):
        raise ValueError("ranks must form a permutation of 1..n")
    return arr


def linear_rank_statistic(rx, ry, phi1: ScoreFunction, phi2: ScoreFunction) -> float:
    """T = sum phi1(RX/(n+1)) phi2(RY/(n+1)) over paired rank vectors."""
    rx = _check_ranks(rx)
    ry = _check_ranks(ry, rx.shape[0])
    n = rx.shape[0]
    a = phi1.values(n)
    b = phi2.values(n)
    return float(np.sum(a[rx - 1] * b[ry - 1]))


def null_moments(phi1: ScoreFunction, phi2: ScoreFunction, n: int) -> tuple[float, float]:
    """Exact (mean, variance) of T under uniformly random rank permutations."""
    if n < 2:
        raise ValueError("need n >= 2 for null moments")
    a = phi1.values(n)
    b = phi2.values(n)
    mean = n * a.mean() * b.mean()
    var = float(((a - a.mean()) ** 2).sum() * ((b - b.mean()) ** 2).sum()) / (n - 1)
    return float(mean), var


def standardized_statistic(t: float, mean: float, variance: float) -> float:
    """W = (T - mean) / sqrt(variance)."""
    if variance <= 0.0:
        raise ValueError(f"variance must be positive, got {variance}")
    return (t - mean) / math.sqrt(variance)


def spearman_statistic(rx, ry) -> float:
    """Closed-form standardized Spearman statistic.

    W = 12 / (n (n+1) sqrt(n-1)) * sum RX RY - 3 (n+1) / sqrt(n-1); equals the
    general-score route with identity scores.
    """
    rx = _check_ranks(rx)
    ry = _check_ranks(ry, rx.shape[0])
    n = rx.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    cross = float(np.sum(rx.astype(float) * ry.astype(float)))
    root = math.sqrt(n - 1)
    return 12.0 * cross / (n * (n + 1) * root) - 3.0 * (n + 1) / root


def normal_p_value(w: float, alternative: str = "two-sided") -> float:
    """Standard-normal p-value of an observed W."""
    if alternative == "two-sided":
        return math.erfc(abs(w) / math.sqrt(2.0))
    if alternative == "greater":
        return 0.5 * math.erfc(w / math.sqrt(2.0))
    if alternative == "less":
        return 0.5 * math.erfc(-w / math.sqrt(2.0))
    raise ValueError(f"unknown alternative {alternative!r}")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one independence test."""

    __test__ = False  # keep pytest from collecting this as a test class

    statistic: float
    p_value: float
    reject: bool
    alpha: float
    n: int
    score_x: str
    score_y: str
    alternative: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TestReport":
        return TestReport(**json.loads(text))


def rank_test_from_ranks(rx, ry, phi1: ScoreFunction, phi2: ScoreFunction,
                         alpha: float = 0.05, alternative: str = "two-sided") -> TestReport:
    """Standardized linear rank test given precomputed global ranks."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rx = _check_ranks(rx)
    ry = _check_ranks(ry, rx.shape[0])
    n = rx.shape[0]
    t = linear_rank_statistic(rx, ry, phi1, phi2)
    mean, var = null_moments(phi1, phi2, n)
    w = standardized_statistic(t, mean, var)
    p = normal_p_value(w, alternative)
    return TestReport(statistic=w, p_value=p, reject=bool(p < alpha), alpha=alpha,
                      n=n, score_x=phi1.name, score_y=phi2.name, alternative=alternative)


def independence_test(space_x: Space, xs, space_y: Space, ys,
                      phi1: ScoreFunction | None = None, phi2: ScoreFunction | None = None,
                      alpha: float = 0.05, alternative: str = "two-sided",
                      threads: int = 1) -> TestReport:
    """Metric rank-based test of independence of paired samples.

    The global metric ranks of each sample are computed in its own space; the
    standardized linear rank statistic is referred to the standard normal.
    """
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise ValueError(f"paired samples must have equal length: {len(xs)} != {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need n >= 2 paired observations")
    phi1 = phi1 if phi1 is not None else ScoreFunction.spearman()
    phi2 = phi2 if phi2 is not None else ScoreFunction.spearman()
    # permutation ranks: equal to the global ranks whenever J_n is tie-free,
    # with index-order tie-breaking otherwise, as rank statistics need
    # permutation input
    rx = QuantileEngine(space_x, xs, threads=threads).global_permutation_ranks
    ry = QuantileEngine(space_y, ys, threads=threads).global_permutation_ranks
    return rank_test_from_ranks(rx, ry, phi1, phi2, alpha=alpha, alternative=alternative)
