"""Seeded random generators for the simulation families, plus contamination.

Every sampler is a pure function ``(n, rng) -> list of points`` consuming a
single ``numpy.random.Generator`` stream, so an identical seed reproduces a
bit-identical sequence.  Parallel Monte Carlo derives one independent
counter-based stream per replication via :func:`rng_for`.

Paper-default parameter sets are exposed through :data:`DEFAULT_PARAMS` and the
family registry :func:`make_sampler` / :func:`sampler_from_spec` used by the
experiment configs.
"""

from __future__ import annotations

import logging
import math
from typing import Callable

import numpy as np

from .errors import ConfigError
from .spaces import GaussianPoint, TreePoint

log = logging.getLogger(__name__)

Sampler = Callable[[int, np.random.Generator], list]

SPD_REJECT_MARGIN = 1e-12


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based stream for (seed, replication path)."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def sample_gaussian(dim: int, mean, cov, n: int, rng: np.random.Generator) -> list:
    """Multivariate normal draws via the Cholesky factor of the covariance."""
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
    cov = np.eye(dim) if cov is None else np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    draws = mean + rng.standard_normal((n, dim)) @ chol.T
    return list(draws)


def sample_gaussian_mixture(means, covs, weights, n: int, rng: np.random.Generator) -> list:
    """Finite mixture of Gaussians; component picked first, then one draw each."""
    means = [np.asarray(m, dtype=float) for m in means]
    chols = [np.linalg.cholesky(np.asarray(c, dtype=float)) for c in covs]
    cum = np.cumsum(np.asarray(weights, dtype=float))
    if abs(cum[-1] - 1.0) > 1e-12:
        raise ValueError("mixture weights must sum to 1")
    comp = np.searchsorted(cum, rng.random(n), side="right")
    z = rng.standard_normal((n, means[0].shape[0]))
    out = []
    for i in range(n):
        k = int(comp[i])
        out.append(means[k] + chols[k] @ z[i])
    return out


def sample_skew_t(dim: int, xi, sigma, alpha, nu: float, n: int,
                  rng: np.random.Generator) -> list:
    """Skew-t draws via the stochastic representation: a skew-normal variate
    divided by sqrt(chi^2_nu / nu), then scaled and shifted."""
    xi = np.zeros(dim) if xi is None else np.asarray(xi, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    w = np.sqrt(np.diagonal(sigma))
    omega_bar = sigma / np.outer(w, w)
    quad = float(alpha @ omega_bar @ alpha)
    delta = omega_bar @ alpha / math.sqrt(1.0 + quad)
    joint = np.zeros((dim + 1, dim + 1))
    joint[0, 0] = 1.0
    joint[0, 1:] = delta
    joint[1:, 0] = delta
    joint[1:, 1:] = omega_bar
    chol = np.linalg.cholesky(joint)
    z = rng.standard_normal((n, dim + 1)) @ chol.T
    signs = np.where(z[:, 0] > 0.0, 1.0, -1.0)
    skew_normal = z[:, 1:] * signs[:, None]
    chi = rng.chisquare(nu, n)
    scaled = skew_normal / np.sqrt(chi / nu)[:, None]
    return list(xi + scaled * w)


def _orthonormal_complement(mu: np.ndarray) -> np.ndarray:
    """Deterministic p x (p-1) orthonormal basis of the complement of mu,
    built by Gram-Schmidt against the standard basis."""
    p = mu.shape[0]
    basis = [mu]
    for i in range(p):
        cand = np.zeros(p)
        cand[i] = 1.0
        for b in basis:
            cand = cand - (cand @ b) * b
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            basis.append(cand / norm)
        if len(basis) == p:
            break
    return np.column_stack(basis[1:])


def _vmf_weights(p: int, kappa: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Cosines of the angle to the mean direction, by batched rejection."""
    m = p - 1
    b = m / (math.sqrt(4.0 * kappa * kappa + m * m) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        batch = max(32, int(1.3 * (n - filled)))
        z = rng.beta(m / 2.0, m / 2.0, batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(batch)
        keep = kappa * w + m * np.log1p(-x0 * w) - c >= np.log(u)
        accepted = w[keep]
        take = min(accepted.size, n - filled)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def sample_vmf(mu, kappa: float, n: int, rng: np.random.Generator) -> list:
    """von Mises-Fisher draws by rejection on the tangent-normal decomposition."""
    mu = np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    p = mu.shape[0]
    w = _vmf_weights(p, float(kappa), n, rng)
    tang = rng.standard_normal((n, p))
    tang = tang - np.outer(tang @ mu, mu)
    norms = np.linalg.norm(tang, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        tang[bad] = rng.standard_normal((int(bad.sum()), p))
        tang[bad] -= np.outer(tang[bad] @ mu, mu)
        norms = np.linalg.norm(tang, axis=1)
    tang = tang / norms[:, None]
    draws = w[:, None] * mu + np.sqrt(1.0 - w * w)[:, None] * tang
    return list(draws)


def sample_vmf_mixture(mus, kappas, weights, n: int, rng: np.random.Generator) -> list:
    """Mixture of von Mises-Fisher components selected by a uniform draw."""
    components = [sample_vmf(mu, k, n, rng) for mu, k in zip(mus, kappas)]
    cum = np.cumsum(np.asarray(weights, dtype=float))
    if abs(cum[-1] - 1.0) > 1e-12:
        raise ValueError("mixture weights must sum to 1")
    pick = np.searchsorted(cum, rng.random(n), side="right")
    return [components[int(pick[i])][i] for i in range(n)]


def sample_tangent_vmf(mu, omega, kappa: float, beta_a: float, beta_b: float,
                       n: int, rng: np.random.Generator) -> list:
    """Tangent vMF draws: V mu + sqrt(1 - V^2) Gamma_mu U with V = 2 Beta - 1
    and U a vMF draw on the equatorial sphere."""
    mu = np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    v = 2.0 * rng.beta(beta_a, beta_b, n) - 1.0
    u = np.asarray(sample_vmf(omega, kappa, n, rng))
    gamma = _orthonormal_complement(mu)
    draws = v[:, None] * mu + np.sqrt(1.0 - v * v)[:, None] * (u @ gamma.T)
    return list(draws)


def sample_wishart(p: int, dof: float, scale, n: int, rng: np.random.Generator) -> list:
    """Wishart draws by the Bartlett decomposition; every draw is SPD."""
    if dof < p:
        raise ValueError(f"need dof >= p for positive definite draws, got dof={dof}, p={p}")
    scale = np.eye(p) if scale is None else np.asarray(scale, dtype=float)
    chol = np.linalg.cholesky(scale)
    chis = rng.chisquare(dof - np.arange(p), size=(n, p))
    normals = rng.standard_normal((n, p, p))
    a = np.tril(normals, -1)
    idx = np.arange(p)
    a[:, idx, idx] = np.sqrt(chis)
    b = chol @ a
    out = []
    for i in range(n):
        w = b[i] @ b[i].T
        out.append((w + w.T) / 2.0)
    return out


def sample_spd_lognormal(n: int, rng: np.random.Generator, mu: float = 0.0,
                         sigma: float = 1.0) -> list:
    """2 x 2 SPD matrices ((x, y), (y, z)) with log-normal entries.

    Draws with x z <= y^2 + 1e-12 cannot be represented in the space and are
    rejected; the acceptance rate is logged.
    """
    out = []
    proposed = 0
    while len(out) < n:
        batch = max(32, int(2.5 * (n - len(out))))
        xyz = rng.lognormal(mu, sigma, size=(batch, 3))
        proposed += batch
        keep = xyz[:, 0] * xyz[:, 2] > xyz[:, 1] ** 2 + SPD_REJECT_MARGIN
        for x, y, z in xyz[keep][:n - len(out)]:
            out.append(np.array([[x, y], [y, z]]))
    log.info("spd-lognormal acceptance rate: %.3f (%d accepted of %d proposed)",
             n / proposed, n, proposed)
    return out


def sample_wasserstein_gaussian(n: int, rng: np.random.Generator,
                                sigma_law: str = "uniform") -> list:
    """Centered 1-D Gaussian measures with sigma from U(0,1) or Beta(2,5)."""
    if sigma_law == "uniform":
        draw = lambda m: rng.random(m)
    elif sigma_law == "beta":
        draw = lambda m: rng.beta(2.0, 5.0, m)
    else:
        raise ValueError(f"unknown sigma law {sigma_law!r}")
    sigmas = draw(n)
    while np.any(sigmas <= 0.0):
        bad = sigmas <= 0.0
        sigmas[bad] = draw(int(bad.sum()))
    return [GaussianPoint(0.0, float(s)) for s in sigmas]


def sample_bhv_tree(n: int, rng: np.random.Generator,
                    branch_probs=(0.1, 0.8, 0.1),
                    length_beta=(2.0, 2.0)) -> list:
    """Spider trees: branch from the given probabilities, length from Beta."""
    cum = np.cumsum(np.asarray(branch_probs, dtype=float))
    if abs(cum[-1] - 1.0) > 1e-12:
        raise ValueError("branch probabilities must sum to 1")
    branches = np.searchsorted(cum, rng.random(n), side="right") + 1
    lengths = rng.beta(length_beta[0], length_beta[1], n)
    return [TreePoint(int(b), float(l)) for b, l in zip(branches, lengths)]


def sample_multivariate_cauchy(dim: int, n: int, rng: np.random.Generator) -> list:
    """Coordinatewise standard Cauchy draws."""
    return list(rng.standard_cauchy((n, dim)))


def contaminate(sampler1: Sampler, sampler2: Sampler, alpha: float, n: int,
                rng: np.random.Generator) -> list:
    """Mixture (1 - alpha) P1 + alpha P2, each draw contaminated independently.

    Three sub-streams are spawned from ``rng`` in order (selection, P1, P2), so
    alpha = 0 reproduces the P1 stream of the matching sub-seed exactly.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"contamination fraction must lie in [0, 1], got {alpha}")
    select_rng, rng1, rng2 = rng.spawn(3)
    mask = select_rng.random(n) < alpha
    n2 = int(mask.sum())
    pts1 = sampler1(n - n2, rng1)
    pts2 = sampler2(n2, rng2)
    out = []
    i1 = i2 = 0
    for contaminated in mask:
        if contaminated:
            out.append(pts2[i2])
            i2 += 1
        else:
            out.append(pts1[i1])
            i1 += 1
    return out


WISHART_SCALE = ((1.0, 0.6, 0.36), (0.6, 1.0, 0.6), (0.36, 0.6, 1.0))

DEFAULT_PARAMS: dict[str, dict] = {
    "gaussian": {"dim": 2, "mean": None, "cov": None},
    "gaussian-mixture": {
        "means": ((-3.0, 0.0), (3.0, 0.0), (0.0, -2.5)),
        "covs": (((5.0, -4.0), (-4.0, 5.0)), ((5.0, 4.0), (4.0, 5.0)),
                 ((4.0, 0.0), (0.0, 1.0))),
        "weights": (0.375, 0.375, 0.25),
    },
    "skew-t": {"dim": 2, "xi": None, "sigma": ((7.0, 4.0), (4.0, 5.0)),
               "alpha": (5.0, 2.0), "nu": 6.0},
    "vmf": {"mu": (0.0, 0.0, 1.0), "kappa": 20.0},
    "vmf-mixture": {
        "mus": ((0.0, -1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
                (0.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0))),
        "kappas": (50.0, 50.0),
        "weights": (0.3, 0.7),
    },
    "tangent-vmf": {"mu": (0.0, 0.0, 1.0), "omega": (0.7, math.sqrt(0.51)),
                    "kappa": 10.0, "beta_a": 2.0, "beta_b": 8.0},
    "wishart": {"p": 3, "dof": 3.0, "scale": WISHART_SCALE},
    "spd-lognormal": {"mu": 0.0, "sigma": 1.0},
    "wasserstein-gaussian": {"sigma_law": "uniform"},
    "bhv-tree": {"branch_probs": (0.1, 0.8, 0.1), "length_beta": (2.0, 2.0)},
    "cauchy": {"dim": 3},
}


def make_sampler(family: str, params: dict | None = None) -> Sampler:
    """Build a sampler callable for a named family, paper defaults filled in."""
    if family == "contaminated":
        params = dict(params or {})
        try:
            p1 = sampler_from_spec(params["p1"])
            p2 = sampler_from_spec(params["p2"])
            alpha = float(params["alpha"])
        except KeyError as missing:
            raise ConfigError(f"contaminated sampler needs {missing} in its spec") from None
        return lambda n, rng: contaminate(p1, p2, alpha, n, rng)
    if family not in DEFAULT_PARAMS:
        raise ConfigError(f"unknown sampler family {family!r}; "
                          f"known: {sorted(DEFAULT_PARAMS) + ['contaminated']}")
    merged = dict(DEFAULT_PARAMS[family])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ConfigError(f"unknown parameter {key!r} for sampler family {family!r}")
        merged[key] = value

    if family == "gaussian":
        return lambda n, rng: sample_gaussian(int(merged["dim"]), merged["mean"],
                                              merged["cov"], n, rng)
    if family == "gaussian-mixture":
        return lambda n, rng: sample_gaussian_mixture(merged["means"], merged["covs"],
                                                      merged["weights"], n, rng)
    if family == "skew-t":
        return lambda n, rng: sample_skew_t(int(merged["dim"]), merged["xi"],
                                            merged["sigma"], merged["alpha"],
                                            float(merged["nu"]), n, rng)
    if family == "vmf":
        return lambda n, rng: sample_vmf(merged["mu"], float(merged["kappa"]), n, rng)
    if family == "vmf-mixture":
        return lambda n, rng: sample_vmf_mixture(merged["mus"], merged["kappas"],
                                                 merged["weights"], n, rng)
    if family == "tangent-vmf":
        return lambda n, rng: sample_tangent_vmf(merged["mu"], merged["omega"],
                                                 float(merged["kappa"]),
                                                 float(merged["beta_a"]),
                                                 float(merged["beta_b"]), n, rng)
    if family == "wishart":
        return lambda n, rng: sample_wishart(int(merged["p"]), float(merged["dof"]),
                                             merged["scale"], n, rng)
    if family == "spd-lognormal":
        return lambda n, rng: sample_spd_lognormal(n, rng, mu=float(merged["mu"]),
                                                   sigma=float(merged["sigma"]))
    if family == "wasserstein-gaussian":
        return lambda n, rng: sample_wasserstein_gaussian(n, rng,
                                                          sigma_law=merged["sigma_law"])
    if family == "bhv-tree":
        return lambda n, rng: sample_bhv_tree(n, rng,
                                              branch_probs=merged["branch_probs"],
                                              length_beta=merged["length_beta"])
    if family == "cauchy":
        return lambda n, rng: sample_multivariate_cauchy(int(merged["dim"]), n, rng)
    raise ConfigError(f"unhandled sampler family {family!r}")


def sampler_from_spec(spec: dict) -> Sampler:
    """Parse a JSON sampler spec {"family": ..., other params} into a callable."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("sampler spec must be an object with a 'family' key")
    params = {k: v for k, v in spec.items() if k != "family"}
    return make_sampler(str(spec["family"]), params)
