"""Experiment runners: reproducible artifacts from declarative configs.

Every runner is a pure function of (config, seed).  Replications draw from
independent derived streams ``rng_for(seed, stage, replication)``, aggregation
order is fixed by replication index, and CSV artifacts embed the effective
config and seed in a comment header, so reruns are byte-identical regardless
of thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .emdf import dump_matrices
from .errors import ConfigError
from .inference import independence_test
from .quantiles import QuantileEngine
from .samplers import contaminate, rng_for, sample_gaussian, sampler_from_spec
from .spaces import Space, space_from_descriptor

# (space descriptor, sampler spec) behind each named breakdown setting
BREAKDOWN_PRESETS: dict[str, tuple[dict, dict]] = {
    "gaussian": ({"kind": "euclidean-lp", "dim": 2, "q": 2.0},
                 {"family": "gaussian", "dim": 2}),
    "skew-t": ({"kind": "euclidean-lp", "dim": 2, "q": 2.0},
               {"family": "skew-t"}),
    "vmf": ({"kind": "sphere-geodesic", "dim": 3}, {"family": "vmf"}),
    "tangent-vmf": ({"kind": "sphere-geodesic", "dim": 3}, {"family": "tangent-vmf"}),
    "wishart": ({"kind": "spd-affine-invariant", "p": 3}, {"family": "wishart"}),
}

ROBUSTNESS_MAX_ALPHA = 0.5


def map_replications(fn, count: int, threads: int = 1) -> list:
    """Run ``fn(0..count-1)``, optionally on a thread pool; order is by index."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


def _write_csv(path: Path, cfg: ExperimentConfig, columns, rows,
               extra_comments: list[str] | None = None) -> Path:
    """CSV artifact with config/seed header; float columns carry a _hex twin."""
    lines = ["# config: " + json.dumps(cfg.raw, sort_keys=True),
             f"# seed: {cfg.seed}"]
    for comment in extra_comments or []:
        lines.append("# " + comment)
    header_cells = []
    for name, kind in columns:
        if kind == "float":
            header_cells.extend([name, name + "_hex"])
        else:
            header_cells.append(name)
    lines.append(",".join(header_cells))
    for row in rows:
        cells = []
        for (name, kind), value in zip(columns, row):
            if kind == "float":
                value = float(value)
                cells.extend([repr(value), value.hex()])
            elif kind == "int":
                cells.append(str(int(value)))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def _space_and_sampler(cfg: ExperimentConfig) -> tuple[Space, object]:
    try:
        space = space_from_descriptor(cfg.require("space"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad space descriptor: {exc}") from None
    sampler = sampler_from_spec(cfg.require("sampler"))
    return space, sampler


def _point_columns(space: Space) -> list[tuple[str, str]]:
    return [(lab, "float") for lab in space.coordinate_labels()]


def _local_map_rows(space: Space, points, anchor):
    engine_free = space.distances_from(anchor, points)
    order = np.sort(engine_free)
    ranks = np.searchsorted(order, engine_free, side="right")
    n = len(points)
    signs = np.sign(2 * ranks - (n + 1))
    rows = []
    for idx, point in enumerate(points):
        coords = space.flatten(point)
        rows.append([*coords, int(ranks[idx]), ranks[idx] / n, int(signs[idx])])
    return rows


LOCAL_MAP_COLUMNS = [("local_rank", "int"), ("level", "float"), ("sign", "int")]


def _maybe_save_dataset(cfg: ExperimentConfig, space: Space, points) -> list[Path]:
    if not cfg.get("save_dataset"):
        return []
    from .dataio import write_dataset
    meta = {"sampler": cfg.require("sampler"), "seed": cfg.seed, "n": len(points)}
    return [write_dataset(cfg.out / "dataset.csv", space, points, meta=meta)]


def run_quantile_map(cfg: ExperimentConfig) -> list[Path]:
    """Per-point global quantile summary, optionally with reference contours."""
    space, sampler = _space_and_sampler(cfg)
    n = cfg.positive_int("n")
    points = sampler(n, rng_for(cfg.seed, 0))
    engine = QuantileEngine(space, points, threads=cfg.threads)
    artifacts = _maybe_save_dataset(cfg, space, points)

    if engine.is_degenerate:
        # constant J carries no global ordering; fall back to local quantiles
        anchor_coords = cfg.get("anchor")
        if anchor_coords is None:
            raise ConfigError(
                "sample has constant J (uniform case); supply an 'anchor' for the "
                "local-quantile fallback")
        anchor = space.unflatten(np.asarray(anchor_coords, dtype=float))
        rows = _local_map_rows(space, points, anchor)
        out = _write_csv(cfg.out / "quantile_map.csv", cfg,
                         _point_columns(space) + LOCAL_MAP_COLUMNS, rows,
                         extra_comments=["degenerate-j: local quantiles at anchor"])
        return artifacts + [out]

    levels = engine.global_levels
    ranks = engine.global_ranks
    signs = engine.global_signs
    jvals = engine.j_values
    rows = []
    for idx, point in enumerate(points):
        rows.append([*space.flatten(point), jvals[idx], int(ranks[idx]),
                     levels[idx], int(signs[idx]), 1.0 - levels[idx]])
    columns = _point_columns(space) + [("j", "float"), ("global_rank", "int"),
                                       ("level", "float"), ("sign", "int"),
                                       ("depth", "float")]
    artifacts.append(_write_csv(cfg.out / "quantile_map.csv", cfg, columns, rows))

    tau_grid = cfg.get("tau_grid")
    if tau_grid is not None:
        taus = [float(t) for t in tau_grid]
        for tau in taus:
            if not 0.0 <= tau <= 1.0:
                raise ConfigError(f"tau grid values must lie in [0, 1], got {tau}")
        qrows = []
        for tau in taus:
            res = engine.global_quantile(tau)
            qrows.append([tau, int(res.index), *space.flatten(res.point),
                          res.achieved_level])
        qcols = [("tau", "float"), ("index", "int")] + _point_columns(space) + \
                [("level", "float")]
        artifacts.append(_write_csv(cfg.out / "selected_quantiles.csv", cfg,
                                    qcols, qrows))

    grid = cfg.get("grid")
    if grid is not None:
        reference_n = cfg.positive_int("reference_n", 10000)
        reference = sampler(reference_n, rng_for(cfg.seed, 1))
        ref_engine = QuantileEngine(space, reference, threads=cfg.threads)
        grid_points = [space.unflatten(np.asarray(g, dtype=float)) for g in grid]
        crows = []
        for gp in grid_points:
            j = ref_engine.j_at(gp)
            level = ref_engine.f_jn(j)
            crows.append([*space.flatten(gp), j, level, 1.0 - level])
        ccols = _point_columns(space) + [("j", "float"), ("level", "float"),
                                         ("depth", "float")]
        artifacts.append(_write_csv(cfg.out / "contours.csv", cfg, ccols, crows))

    if cfg.dump_matrices:
        artifacts.extend(dump_matrices(engine.distances, engine.ranks, cfg.out))
    return artifacts


def run_local_quantile_map(cfg: ExperimentConfig) -> list[Path]:
    """Per-point local ranks/levels/signs relative to a fixed anchor."""
    space, sampler = _space_and_sampler(cfg)
    n = cfg.positive_int("n")
    anchor = space.unflatten(np.asarray(cfg.require("anchor"), dtype=float))
    points = sampler(n, rng_for(cfg.seed, 0))
    artifacts = _maybe_save_dataset(cfg, space, points)
    rows = _local_map_rows(space, points, anchor)
    out = _write_csv(cfg.out / "local_quantile_map.csv", cfg,
                     _point_columns(space) + LOCAL_MAP_COLUMNS, rows)
    return artifacts + [out]


def run_robustness(cfg: ExperimentConfig) -> list[Path]:
    """Mean distance of the metric median to the clean-model center per alpha."""
    space, clean = _space_and_sampler(cfg)
    contaminant = sampler_from_spec(cfg.require("contaminant"))
    center = space.unflatten(np.asarray(cfg.require("center"), dtype=float))
    grid = [float(a) for a in cfg.require("contamination_grid")]
    for alpha in grid:
        if not 0.0 <= alpha < ROBUSTNESS_MAX_ALPHA:
            raise ConfigError(f"contamination fractions must lie in [0, 0.5), got {alpha}")
    n = cfg.positive_int("n", 100)
    reps = cfg.positive_int("replications")

    rows = []
    for ai, alpha in enumerate(grid):
        def one(rep: int, _alpha=alpha, _ai=ai) -> float:
            pts = contaminate(clean, contaminant, _alpha, n, rng_for(cfg.seed, _ai, rep))
            median = QuantileEngine(space, pts).metric_median().point
            return space.distance(median, center)

        dists = map_replications(one, reps, threads=cfg.threads)
        rows.append([alpha, float(np.mean(dists)), reps])
    out = _write_csv(cfg.out / "robustness.csv", cfg,
                     [("alpha", "float"), ("mean_distance", "float"),
                      ("replications", "int")], rows)
    return [out]


def run_breakdown_table(cfg: ExperimentConfig) -> list[Path]:
    """Averaged breakdown lower bounds for the named sampling presets."""
    families = cfg.get("families", list(BREAKDOWN_PRESETS))
    for fam in families:
        if fam not in BREAKDOWN_PRESETS:
            raise ConfigError(f"unknown breakdown preset {fam!r}; "
                              f"known: {sorted(BREAKDOWN_PRESETS)}")
    n = cfg.positive_int("n", 1000)
    reps = cfg.positive_int("replications", 20)

    rows = []
    for fi, fam in enumerate(families):
        space_desc, sampler_spec = BREAKDOWN_PRESETS[fam]
        space = space_from_descriptor(space_desc)
        sampler = sampler_from_spec(sampler_spec)

        def one(rep: int, _fi=fi) -> float:
            pts = sampler(n, rng_for(cfg.seed, _fi, rep))
            return QuantileEngine(space, pts).breakdown_lower_bound()

        bounds = np.asarray(map_replications(one, reps, threads=cfg.threads))
        rows.append([fam, float(bounds.mean()), float(bounds.std(ddof=1)) if reps > 1 else 0.0,
                     reps, n])
    out = _write_csv(cfg.out / "breakdown.csv", cfg,
                     [("family", "str"), ("mean_bound", "float"), ("sd_bound", "float"),
                      ("replications", "int"), ("n", "int")], rows)
    return [out]


def spd_response_pairs(k: float, n: int, rng: np.random.Generator,
                       noise: str = "gaussian"):
    """Paired (X, Y) for the dependence model with SPD(2)-valued responses.

    X is bivariate standard normal.  The vector v = k X + 0.8 eps is broadcast
    against the identity, A = v 1' + 0.5 I, and Y = A A' which is positive
    definite almost surely.  ``noise`` selects Gaussian or coordinatewise
    Cauchy eps.
    """
    x = np.asarray(sample_gaussian(2, None, None, n, rng))
    if noise == "gaussian":
        eps = np.asarray(sample_gaussian(2, None, None, n, rng))
    elif noise == "cauchy":
        eps = rng.standard_cauchy((n, 2))
    else:
        raise ConfigError(f"unknown noise kind {noise!r}")
    v = k * x + 0.8 * eps
    a = v[:, :, None] * np.ones((1, 1, 2)) + 0.5 * np.eye(2)
    y = a @ np.transpose(a, (0, 2, 1))
    y = (y + np.transpose(y, (0, 2, 1))) / 2.0
    return [row for row in x], [m for m in y]


def run_indep_power(cfg: ExperimentConfig) -> list[Path]:
    """Rejection-rate sweep of the Spearman metric rank test over k or n."""
    from .spaces import EuclideanSpace, SpdSpace

    noise = cfg.get("noise", "gaussian")
    level = float(cfg.get("alpha", 0.05))
    alternative = cfg.get("alternative", "two-sided")
    reps = cfg.positive_int("replications")
    k_grid = cfg.get("k_grid")
    n_grid = cfg.get("n_grid")
    if (k_grid is None) == (n_grid is None):
        raise ConfigError("indep-power needs exactly one of 'k_grid' or 'n_grid'")
    if k_grid is not None:
        sweep_name = "k"
        values = [float(k) for k in k_grid]
        fixed_n = cfg.positive_int("n", 100)
    else:
        sweep_name = "n"
        values = [int(v) for v in n_grid]
        fixed_k = float(cfg.require("k"))

    space_x, space_y = EuclideanSpace(2), SpdSpace(2)
    rows = []
    for gi, value in enumerate(values):
        k, n = (value, fixed_n) if sweep_name == "k" else (fixed_k, value)

        def one(rep: int, _k=k, _n=n, _gi=gi) -> bool:
            xs, ys = spd_response_pairs(_k, _n, rng_for(cfg.seed, _gi, rep), noise=noise)
            return independence_test(space_x, xs, space_y, ys, alpha=level,
                                     alternative=alternative).reject

        rejections = map_replications(one, reps, threads=cfg.threads)
        rows.append([value, float(np.mean(rejections)), reps, cfg.seed])
    out = _write_csv(cfg.out / "indep_power.csv", cfg,
                     [(sweep_name, "float" if sweep_name == "k" else "int"),
                      ("rejection_rate", "float"), ("replications", "int"),
                      ("seed", "int")], rows)
    return [out]


RUNNERS = {
    "quantile-map": run_quantile_map,
    "local-quantile-map": run_local_quantile_map,
    "robustness": run_robustness,
    "breakdown": run_breakdown_table,
    "indep-power": run_indep_power,
}


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Dispatch a parsed config to its runner; returns written artifact paths."""
    try:
        runner = RUNNERS[cfg.command]
    except KeyError:
        raise ConfigError(f"unknown command {cfg.command!r}") from None
    return runner(cfg)
