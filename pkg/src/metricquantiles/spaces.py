"""Metric spaces: points, distances, and exact isometries.

Six space kinds are supported:

* ``euclidean-lp``          -- R^d under the L_q norm, q >= 1; points are 1-D arrays.
* ``sphere-geodesic``       -- the unit sphere S^{d-1} under arc length; unit-norm arrays.
* ``spd-affine-invariant``  -- p x p symmetric positive definite matrices under the
  affine-invariant Riemannian distance; points are (p, p) arrays.
* ``wasserstein2-gaussian1d`` -- one-dimensional Gaussian measures under the
  2-Wasserstein distance, which is closed-form in (mean, sigma); :class:`GaussianPoint`.
* ``bhv-t3``                -- the three-spider tree space: three half-lines glued at
  the origin; :class:`TreePoint`.
* ``product``               -- an L_p combination of component spaces; points are tuples.

All operations are pure functions and treat points as immutable, so spaces and
packed samples may be shared freely across threads.

A deliberate implementation constraint: relabeling transforms (coordinate
permutations, axis sign flips, simultaneous row/column permutations of SPD
matrices) must leave computed distances bit-for-bit unchanged.  Distance terms
are therefore accumulated in sorted order, and SPD pairs are reindexed into a
canonical order before any arithmetic.  :func:`exact_isometry` builds the
corresponding point transforms.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericError

UNIT_NORM_TOL = 1e-10
SPD_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GaussianPoint:
    """A one-dimensional Gaussian measure N(mean, sigma^2) with sigma > 0."""

    mean: float
    sigma: float


@dataclass(frozen=True)
class TreePoint:
    """A point of the three-spider: branch index in {1, 2, 3} and a leg length >= 0.

    Length zero is the origin where the three legs meet, whatever the branch label.
    """

    branch: int
    length: float


class Space(ABC):
    """Base class for metric spaces."""

    kind: str

    @abstractmethod
    def validate(self, point) -> None:
        """Raise ``ValueError`` if ``point`` does not belong to this space."""

    @abstractmethod
    def pack(self, points):
        """Bundle a point sequence into array form for vectorized distance rows."""

    @abstractmethod
    def _slice(self, packed, start: int):
        """Suffix ``packed[start:]`` of a packed sample."""

    @abstractmethod
    def _dists(self, u, packed) -> np.ndarray:
        """Distances from ``u`` (first argument) to every packed point."""

    @abstractmethod
    def flatten(self, point) -> np.ndarray:
        """Flat float coordinates of ``point`` (CSV row form)."""

    @abstractmethod
    def unflatten(self, coords: np.ndarray):
        """Inverse of :meth:`flatten`; validates the result."""

    @abstractmethod
    def coordinate_labels(self) -> list[str]:
        """Column labels matching :meth:`flatten`."""

    @abstractmethod
    def descriptor(self) -> dict:
        """JSON-serializable description; inverse of :func:`space_from_descriptor`."""

    def distance(self, u, v) -> float:
        """Distance between two validated points of this space.

        Symmetric, zero (up to representation tolerance) exactly at u = v, and
        satisfies the triangle inequality.  Bitwise-identical representations
        give an exact zero even where the formula would round (arccos near 1).
        """
        self.validate(u)
        self.validate(v)
        if self.points_equal(u, v):
            return 0.0
        return float(self._dists(u, self.pack([v]))[0])

    def distances_from(self, u, points) -> np.ndarray:
        """Vector of distances d(u, X_k) for every point of ``points``."""
        points = list(points)
        self.validate(u)
        for p in points:
            self.validate(p)
        return self._dists(u, self.pack(points))

    def points_equal(self, u, v) -> bool:
        """Exact representation-level equality of two points."""
        return bool(np.array_equal(self.flatten(u), self.flatten(v)))


def _as_vector(point, dim: int | None = None) -> np.ndarray:
    arr = np.asarray(point, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D coordinate array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    return arr


@dataclass(frozen=True)
class EuclideanSpace(Space):
    """R^dim with the L_q distance, q >= 1 (default q = 2)."""

    dim: int
    q: float = 2.0
    kind = "euclidean-lp"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.q >= 1.0:
            raise ValueError("Lp exponent q must satisfy q >= 1")

    def validate(self, point) -> None:
        _as_vector(point, self.dim)

    def pack(self, points) -> np.ndarray:
        return np.asarray(list(points), dtype=float).reshape(len(points), self.dim)

    def _slice(self, packed, start):
        return packed[start:]

    def _dists(self, u, packed) -> np.ndarray:
        diff = np.abs(packed - np.asarray(u, dtype=float))
        if self.q == 2.0:
            terms = diff * diff
        elif self.q == 1.0:
            terms = diff
        else:
            terms = diff**self.q
        # sorted accumulation: permutation/sign-flip isometries stay bit-exact,
        # and small terms are summed first
        terms.sort(axis=-1)
        total = terms.sum(axis=-1)
        if self.q == 2.0:
            return np.sqrt(total)
        if self.q == 1.0:
            return total
        return total ** (1.0 / self.q)

    def flatten(self, point) -> np.ndarray:
        return np.asarray(point, dtype=float).copy()

    def unflatten(self, coords):
        arr = _as_vector(coords, self.dim)
        self.validate(arr)
        return arr

    def coordinate_labels(self) -> list[str]:
        return [f"x{i}" for i in range(self.dim)]

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "q": self.q}


@dataclass(frozen=True)
class SphereSpace(Space):
    """Unit sphere S^{dim-1} embedded in R^dim, geodesic distance arccos(u'v)."""

    dim: int
    kind = "sphere-geodesic"

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("ambient dimension must be >= 2")

    def validate(self, point) -> None:
        arr = _as_vector(point, self.dim)
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"point is not unit-norm: |norm - 1| = {abs(norm - 1.0):.3e}")

    def pack(self, points) -> np.ndarray:
        return np.asarray(list(points), dtype=float).reshape(len(points), self.dim)

    def _slice(self, packed, start):
        return packed[start:]

    def _dists(self, u, packed) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        prods = packed * u
        prods.sort(axis=-1)
        # clamp absorbs rounding at antipodal/identical points before arccos
        cosines = np.clip(prods.sum(axis=-1), -1.0, 1.0)
        out = np.arccos(cosines)
        # arccos rounds self-distances up to ~sqrt(norm tolerance); identical
        # representations are exactly distance zero
        out[np.all(packed == u, axis=-1)] = 0.0
        return out

    def flatten(self, point) -> np.ndarray:
        return np.asarray(point, dtype=float).copy()

    def unflatten(self, coords):
        arr = _as_vector(coords, self.dim)
        self.validate(arr)
        return arr

    def coordinate_labels(self) -> list[str]:
        return [f"x{i}" for i in range(self.dim)]

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


def _canonical_spd_order(x: np.ndarray) -> np.ndarray:
    # index order derived equivariantly from the matrix itself, so a simultaneous
    # row/column permutation of the input cannot change downstream arithmetic
    return np.lexsort((x.sum(axis=1), np.diagonal(x)))


@dataclass(frozen=True)
class SpdSpace(Space):
    """p x p SPD matrices under the affine-invariant Riemannian distance.

    d(X, Y) = sqrt(sum_i log^2 lambda_i) with lambda_i the eigenvalues of
    X^{-1} Y, computed by Cholesky whitening (L^{-1} Y L^{-T} with X = L L')
    followed by a symmetric eigensolve.
    """

    p: int
    kind = "spd-affine-invariant"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("matrix order must be >= 1")

    def validate(self, point) -> None:
        arr = np.asarray(point, dtype=float)
        if arr.shape != (self.p, self.p):
            raise ValueError(f"dimension mismatch: expected {(self.p, self.p)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        if np.max(np.abs(arr - arr.T)) > SPD_SYMMETRY_TOL:
            raise ValueError("matrix is not symmetric to 1e-12")
        try:
            np.linalg.cholesky((arr + arr.T) / 2.0)
        except np.linalg.LinAlgError:
            raise ValueError("matrix is not positive definite") from None

    def pack(self, points) -> np.ndarray:
        return np.asarray(list(points), dtype=float).reshape(len(points), self.p, self.p)

    def _slice(self, packed, start):
        return packed[start:]

    def _dists(self, u, packed) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.p == 2:
            out = self._dists_2x2(u, packed)
        else:
            order = _canonical_spd_order(u)
            uc = u[np.ix_(order, order)]
            pc = packed[:, order, :][:, :, order]
            try:
                chol = np.linalg.cholesky(uc)
            except np.linalg.LinAlgError:
                raise NumericError("Cholesky factorization failed on an SPD input") from None
            linv = solve_triangular(chol, np.eye(self.p), lower=True)
            whitened = linv @ pc @ linv.T
            eigs = np.linalg.eigvalsh(whitened)
            if np.any(eigs <= 0.0):
                raise NumericError("whitened matrix has a non-positive eigenvalue; "
                                   "input pair is numerically non-PD")
            logs = np.log(eigs)
            out = np.sqrt((logs * logs).sum(axis=-1))
        # identical representations are exactly distance zero
        out[np.all(packed == u, axis=(-2, -1))] = 0.0
        return out

    @staticmethod
    def _dists_2x2(u: np.ndarray, packed: np.ndarray) -> np.ndarray:
        # closed form for the eigenvalues of X^{-1} Y: the small one is
        # recovered as det-ratio / large one, which stays accurate for the
        # extremely ill-conditioned pairs whitening cannot handle.  The
        # symmetric term grouping keeps congruence permutations bit-exact.
        det_u = u[0, 0] * u[1, 1] - u[0, 1] * u[0, 1]
        y00 = packed[:, 0, 0]
        y01 = packed[:, 0, 1]
        y11 = packed[:, 1, 1]
        det_y = y00 * y11 - y01 * y01
        if det_u <= 0.0 or np.any(det_y <= 0.0):
            raise NumericError("2x2 input has a non-positive determinant")
        trace = ((u[1, 1] * y00 + u[0, 0] * y11) - 2.0 * (u[0, 1] * y01)) / det_u
        ratio = det_y / det_u
        if np.any(trace <= 0.0):
            raise NumericError("2x2 pair is numerically non-PD")
        disc = np.maximum(trace * trace - 4.0 * ratio, 0.0)
        lam_max = 0.5 * (trace + np.sqrt(disc))
        lam_min = ratio / lam_max
        if np.any(lam_min <= 0.0) or np.any(lam_max <= 0.0):
            raise NumericError("2x2 pair is numerically non-PD")
        log_max = np.log(lam_max)
        log_min = np.log(lam_min)
        return np.sqrt(log_max * log_max + log_min * log_min)

    def flatten(self, point) -> np.ndarray:
        arr = np.asarray(point, dtype=float)
        rows, cols = np.tril_indices(self.p)
        return arr[rows, cols].copy()

    def unflatten(self, coords):
        vals = np.asarray(coords, dtype=float)
        expected = self.p * (self.p + 1) // 2
        if vals.shape != (expected,):
            raise ValueError(f"expected {expected} lower-triangle entries, got {vals.shape}")
        mat = np.zeros((self.p, self.p))
        rows, cols = np.tril_indices(self.p)
        mat[rows, cols] = vals
        mat[cols, rows] = vals
        self.validate(mat)
        return mat

    def coordinate_labels(self) -> list[str]:
        rows, cols = np.tril_indices(self.p)
        return [f"m{i}{j}" for i, j in zip(rows, cols)]

    def descriptor(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class GaussianWassersteinSpace(Space):
    """1-D Gaussian measures under W_2: d = sqrt((m1-m2)^2 + (s1-s2)^2)."""

    kind = "wasserstein2-gaussian1d"

    def validate(self, point) -> None:
        if not isinstance(point, GaussianPoint):
            raise ValueError(f"expected a GaussianPoint, got {type(point).__name__}")
        if not (math.isfinite(point.mean) and math.isfinite(point.sigma)):
            raise ValueError("mean and sigma must be finite")
        if not point.sigma > 0.0:
            raise ValueError("sigma must be positive")

    def pack(self, points) -> np.ndarray:
        return np.array([[p.mean, p.sigma] for p in points], dtype=float).reshape(len(points), 2)

    def _slice(self, packed, start):
        return packed[start:]

    def _dists(self, u, packed) -> np.ndarray:
        return np.hypot(packed[:, 0] - u.mean, packed[:, 1] - u.sigma)

    def flatten(self, point) -> np.ndarray:
        return np.array([point.mean, point.sigma], dtype=float)

    def unflatten(self, coords):
        vals = _as_vector(coords, 2)
        point = GaussianPoint(float(vals[0]), float(vals[1]))
        self.validate(point)
        return point

    def coordinate_labels(self) -> list[str]:
        return ["mean", "sigma"]

    def descriptor(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class TreeSpace(Space):
    """The three-spider: d = |l1 - l2| on a shared branch, l1 + l2 across branches.

    The two formulas agree whenever either length is zero, so the origin needs
    no special casing.
    """

    kind = "bhv-t3"

    def validate(self, point) -> None:
        if not isinstance(point, TreePoint):
            raise ValueError(f"expected a TreePoint, got {type(point).__name__}")
        if point.branch not in (1, 2, 3):
            raise ValueError(f"invalid branch index {point.branch}; must be 1, 2 or 3")
        if not (math.isfinite(point.length) and point.length >= 0.0):
            raise ValueError("length must be finite and >= 0")

    def pack(self, points):
        branches = np.array([p.branch for p in points], dtype=np.int64)
        lengths = np.array([p.length for p in points], dtype=float)
        return branches, lengths

    def _slice(self, packed, start):
        branches, lengths = packed
        return branches[start:], lengths[start:]

    def _dists(self, u, packed) -> np.ndarray:
        branches, lengths = packed
        return np.where(branches == u.branch,
                        np.abs(lengths - u.length),
                        lengths + u.length)

    def flatten(self, point) -> np.ndarray:
        return np.array([float(point.branch), point.length], dtype=float)

    def unflatten(self, coords):
        vals = _as_vector(coords, 2)
        point = TreePoint(int(round(vals[0])), float(vals[1]))
        self.validate(point)
        return point

    def coordinate_labels(self) -> list[str]:
        return ["branch", "length"]

    def descriptor(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class ProductSpace(Space):
    """L_p combination of component metrics: d = (sum_k d_k^p)^{1/p}, p >= 1.

    Points are tuples with one entry per component space.
    """

    components: tuple[Space, ...]
    p: float = 2.0
    kind = "product"

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("a product space needs at least one component")
        if not self.p >= 1.0:
            raise ValueError("product exponent p must satisfy p >= 1")

    def validate(self, point) -> None:
        if not isinstance(point, tuple) or len(point) != len(self.components):
            raise ValueError(f"expected a tuple of {len(self.components)} component points")
        for comp, sub in zip(self.components, point):
            comp.validate(sub)

    def pack(self, points):
        points = list(points)
        return tuple(comp.pack([pt[k] for pt in points])
                     for k, comp in enumerate(self.components))

    def _slice(self, packed, start):
        return tuple(comp._slice(sub, start) for comp, sub in zip(self.components, packed))

    def _dists(self, u, packed) -> np.ndarray:
        parts = [comp._dists(u[k], sub) for k, (comp, sub) in
                 enumerate(zip(self.components, packed))]
        stacked = np.stack(parts, axis=0)
        if self.p == 2.0:
            return np.sqrt((stacked * stacked).sum(axis=0))
        if self.p == 1.0:
            return stacked.sum(axis=0)
        return (stacked**self.p).sum(axis=0) ** (1.0 / self.p)

    def flatten(self, point) -> np.ndarray:
        return np.concatenate([comp.flatten(sub)
                               for comp, sub in zip(self.components, point)])

    def unflatten(self, coords):
        vals = np.asarray(coords, dtype=float)
        out = []
        offset = 0
        for comp in self.components:
            width = len(comp.coordinate_labels())
            out.append(comp.unflatten(vals[offset:offset + width]))
            offset += width
        if offset != vals.shape[0]:
            raise ValueError(f"expected {offset} coordinates, got {vals.shape[0]}")
        return tuple(out)

    def coordinate_labels(self) -> list[str]:
        labels = []
        for k, comp in enumerate(self.components):
            labels.extend(f"c{k}_{lab}" for lab in comp.coordinate_labels())
        return labels

    def descriptor(self) -> dict:
        return {"kind": self.kind, "p": self.p,
                "components": [c.descriptor() for c in self.components]}


def space_from_descriptor(desc: dict) -> Space:
    """Rebuild a :class:`Space` from its :meth:`~Space.descriptor` dictionary."""
    kind = desc.get("kind")
    if kind == "euclidean-lp":
        return EuclideanSpace(dim=int(desc["dim"]), q=float(desc.get("q", 2.0)))
    if kind == "sphere-geodesic":
        return SphereSpace(dim=int(desc["dim"]))
    if kind == "spd-affine-invariant":
        return SpdSpace(p=int(desc["p"]))
    if kind == "wasserstein2-gaussian1d":
        return GaussianWassersteinSpace()
    if kind == "bhv-t3":
        return TreeSpace()
    if kind == "product":
        comps = tuple(space_from_descriptor(c) for c in desc["components"])
        return ProductSpace(components=comps, p=float(desc.get("p", 2.0)))
    raise ValueError(f"unknown space kind: {kind!r}")


def pairwise_distances(space: Space, points, threads: int = 1) -> np.ndarray:
    """Symmetric n x n distance matrix of a homogeneous point sample.

    Parameters
    ----------
    space : Space
        The metric space all points belong to.
    points : sequence
        Points of ``space``; validated individually.
    threads : int
        Row-level parallelism.  The result is independent of the schedule
        because each row is a pure function of the inputs.

    Returns
    -------
    np.ndarray
        Matrix with exact zero diagonal; entry (i, j) computed once for
        i < j and mirrored.
    """
    points = list(points)
    n = len(points)
    if n < 1:
        raise ValueError("need at least one point")
    for p in points:
        space.validate(p)
    packed = space.pack(points)
    out = np.zeros((n, n))

    def fill_row(i: int) -> None:
        out[i, i:] = space._dists(points[i], space._slice(packed, i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n)))
    else:
        for i in range(n):
            fill_row(i)
    lower = np.tril_indices(n, -1)
    out[lower] = out.T[lower]
    np.fill_diagonal(out, 0.0)
    return out


def exact_isometry(space: Space, spec: dict):
    """Build a point transform that preserves distances bit-exactly.

    ``spec`` is ``{"kind": "permute", "perm": [...]}`` for a coordinate
    permutation (Euclidean, sphere) or a simultaneous row/column permutation
    congruence (SPD), or ``{"kind": "flip", "axes": [...]}`` for axis sign
    flips (Euclidean, sphere).

    Raises
    ------
    ValueError
        If the spec kind is unsupported for the space.
    """
    what = spec.get("kind")
    if isinstance(space, (EuclideanSpace, SphereSpace)):
        if what == "permute":
            perm = _checked_permutation(spec["perm"], space.dim)
            return lambda point: np.asarray(point, dtype=float)[perm]
        if what == "flip":
            axes = list(spec["axes"])
            if not all(0 <= a < space.dim for a in axes):
                raise ValueError(f"flip axes out of range for dimension {space.dim}")
            signs = np.ones(space.dim)
            signs[axes] = -1.0
            return lambda point: np.asarray(point, dtype=float) * signs
        raise ValueError(f"unsupported isometry spec {what!r} for {space.kind}")
    if isinstance(space, SpdSpace):
        if what == "permute":
            perm = _checked_permutation(spec["perm"], space.p)
            return lambda point: np.asarray(point, dtype=float)[np.ix_(perm, perm)]
        raise ValueError(f"unsupported isometry spec {what!r} for {space.kind}")
    raise ValueError(f"exact isometries are not supported for space kind {space.kind!r}")


def _checked_permutation(perm, dim: int) -> np.ndarray:
    arr = np.asarray(perm, dtype=np.int64)
    if sorted(arr.tolist()) != list(range(dim)):
        raise ValueError(f"not a permutation of 0..{dim - 1}: {perm}")
    return arr
