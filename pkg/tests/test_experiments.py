import json

import numpy as np
import pytest

from metricquantiles.cli import main
from metricquantiles.config import ExperimentConfig
from metricquantiles.errors import ConfigError
from metricquantiles.experiments import (run_breakdown_table, run_experiment,
                                         run_indep_power, run_local_quantile_map,
                                         run_quantile_map, run_robustness,
                                         spd_response_pairs)
from metricquantiles.quantiles import QuantileEngine
from metricquantiles.samplers import contaminate, rng_for, sampler_from_spec
from metricquantiles.spaces import EuclideanSpace, space_from_descriptor


def _write_config(tmp_path, name, payload):
    payload = {"schema_version": 1, **payload}
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


@pytest.fixture
def quantile_map_config(tmp_path):
    return _write_config(tmp_path, "qm.json", {
        "command": "quantile-map", "seed": 11, "out": str(tmp_path / "qm"),
        "n": 50,
        "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
        "sampler": {"family": "gaussian", "dim": 2},
    })


class TestQuantileMap:
    def test_levels_are_exactly_the_grid(self, tmp_path):
        # seed 2 draws a distinct-J sample at n=500; integer rank-sum ties
        # would merge levels otherwise
        cfg_path = _write_config(tmp_path, "qm500.json", {
            "command": "quantile-map", "seed": 2, "out": str(tmp_path / "qm500"),
            "n": 500,
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
        })
        cfg = ExperimentConfig.from_file(cfg_path)
        [path] = run_quantile_map(cfg)
        header, rows = _rows(path)
        n = len(rows)
        assert n == 500
        level_idx = header.index("level")
        levels = sorted(float(r[level_idx]) for r in rows)
        # distinct-J sample: every level 1/n .. 1 appears exactly once
        assert levels == [(i + 1) / n for i in range(n)]
        depth_idx = header.index("depth")
        for r in rows:
            assert float(r[depth_idx]) == 1.0 - float(r[level_idx])

    def test_rerun_is_byte_identical(self, quantile_map_config):
        cfg = ExperimentConfig.from_file(quantile_map_config)
        [path] = run_quantile_map(cfg)
        first = path.read_bytes()
        [path] = run_quantile_map(ExperimentConfig.from_file(quantile_map_config))
        assert path.read_bytes() == first

    def test_header_embeds_config_and_seed(self, quantile_map_config):
        cfg = ExperimentConfig.from_file(quantile_map_config)
        [path] = run_quantile_map(cfg)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert json.loads(lines[0][len("# config: "):]) == cfg.raw
        assert lines[1] == "# seed: 11"

    def test_contour_grid_artifact(self, tmp_path):
        cfg_path = _write_config(tmp_path, "qmc.json", {
            "command": "quantile-map", "seed": 4, "out": str(tmp_path / "qmc"),
            "n": 40, "reference_n": 300,
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
            "grid": [[0.0, 0.0], [2.5, 0.0], [5.0, 5.0]],
        })
        paths = run_quantile_map(ExperimentConfig.from_file(cfg_path))
        names = sorted(p.name for p in paths)
        assert names == ["contours.csv", "quantile_map.csv"]
        header, rows = _rows(paths[1])
        levels = [float(r[header.index("level")]) for r in rows]
        # the origin is deepest, the far corner shallowest
        assert levels[0] < levels[1] < levels[2]
        assert levels[2] == 1.0

    def test_dump_matrices_flag(self, tmp_path, quantile_map_config):
        cfg = ExperimentConfig.from_file(quantile_map_config, dump_matrices=True)
        paths = run_quantile_map(cfg)
        names = {p.name for p in paths}
        assert {"distance_matrix.csv", "rank_matrix.csv"} <= names

    def test_degenerate_sample_falls_back_to_local(self, tmp_path, monkeypatch):
        constant_point = np.array([1.0, 2.0])
        monkeypatch.setitem(
            __import__("metricquantiles.samplers", fromlist=["DEFAULT_PARAMS"]).DEFAULT_PARAMS,
            "constant", {})
        import metricquantiles.experiments as exp

        def fake_spec(spec):
            if spec.get("family") == "constant":
                return lambda n, rng: [constant_point.copy() for _ in range(n)]
            return sampler_from_spec(spec)

        monkeypatch.setattr(exp, "sampler_from_spec", fake_spec)
        base = {
            "command": "quantile-map", "seed": 9, "out": str(tmp_path / "deg"),
            "n": 8,
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "constant"},
        }
        cfg_path = _write_config(tmp_path, "deg.json", base)
        with pytest.raises(ConfigError, match="anchor"):
            run_quantile_map(ExperimentConfig.from_file(cfg_path))
        cfg_path = _write_config(tmp_path, "deg2.json", dict(base, anchor=[0.0, 0.0]))
        [path] = run_quantile_map(ExperimentConfig.from_file(cfg_path))
        header, rows = _rows(path)
        assert "local_rank" in header
        assert "degenerate-j" in path.read_text()


class TestLocalQuantileMap:
    def test_anchor_on_sample_point_gets_rank_one(self, tmp_path, monkeypatch):
        cfg_path = _write_config(tmp_path, "lqm.json", {
            "command": "local-quantile-map", "seed": 6, "out": str(tmp_path / "lqm"),
            "n": 30, "anchor": [0.0, 0.0],
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
        })
        [path] = run_local_quantile_map(ExperimentConfig.from_file(cfg_path))
        header, rows = _rows(path)
        ranks = [int(r[header.index("local_rank")]) for r in rows]
        assert sorted(ranks) == list(range(1, 31))
        # levels respect the distance-from-anchor ordering
        levels = np.array([float(r[header.index("level")]) for r in rows])
        x = np.array([[float(r[0]), float(r[2])] for r in rows])
        dist = np.linalg.norm(x, axis=1)
        assert np.all(np.argsort(levels, kind="stable") == np.argsort(dist, kind="stable"))


class TestRobustness:
    def _config(self, tmp_path, grid):
        return _write_config(tmp_path, "rob.json", {
            "command": "robustness", "seed": 5, "out": str(tmp_path / "rob"),
            "n": 30, "replications": 3,
            "space": {"kind": "euclidean-lp", "dim": 3, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 3},
            "contaminant": {"family": "cauchy", "dim": 3},
            "center": [0.0, 0.0, 0.0],
            "contamination_grid": grid,
        })

    def test_alpha_zero_equals_pure_pipeline(self, tmp_path):
        cfg = ExperimentConfig.from_file(self._config(tmp_path, [0.0]))
        [path] = run_robustness(cfg)
        header, rows = _rows(path)
        space = space_from_descriptor(cfg.raw["space"])
        p1 = sampler_from_spec(cfg.raw["sampler"])
        p2 = sampler_from_spec(cfg.raw["contaminant"])
        expected = []
        for rep in range(3):
            pts = contaminate(p1, p2, 0.0, 30, rng_for(5, 0, rep))
            med = QuantileEngine(space, pts).metric_median().point
            expected.append(space.distance(med, space.unflatten(np.zeros(3))))
        mean_hex = rows[0][header.index("mean_distance_hex")]
        assert float.fromhex(mean_hex) == float(np.mean(expected))

    def test_rejects_alpha_at_half(self, tmp_path):
        cfg = ExperimentConfig.from_file(self._config(tmp_path, [0.0, 0.5]))
        with pytest.raises(ConfigError, match=r"\[0, 0.5\)"):
            run_robustness(cfg)

    def test_threads_do_not_change_artifact(self, tmp_path):
        path_cfg = self._config(tmp_path, [0.0, 0.3])
        [a] = run_robustness(ExperimentConfig.from_file(path_cfg))
        first = a.read_bytes()
        [b] = run_robustness(ExperimentConfig.from_file(path_cfg, threads=4))
        assert b.read_bytes() == first


class TestBreakdownTable:
    def test_small_run_has_all_requested_families(self, tmp_path):
        cfg_path = _write_config(tmp_path, "bd.json", {
            "command": "breakdown", "seed": 2, "out": str(tmp_path / "bd"),
            "n": 60, "replications": 2, "families": ["gaussian", "vmf"],
        })
        [path] = run_breakdown_table(ExperimentConfig.from_file(cfg_path))
        header, rows = _rows(path)
        assert [r[0] for r in rows] == ["gaussian", "vmf"]
        for r in rows:
            assert 0.0 < float(r[header.index("mean_bound")]) <= 0.5

    def test_unknown_family_rejected(self, tmp_path):
        cfg_path = _write_config(tmp_path, "bd2.json", {
            "command": "breakdown", "seed": 2, "out": str(tmp_path / "bd2"),
            "replications": 2, "families": ["cauchy"],
        })
        with pytest.raises(ConfigError, match="preset"):
            run_breakdown_table(ExperimentConfig.from_file(cfg_path))


class TestIndepPower:
    def test_k_sweep_artifact(self, tmp_path):
        cfg_path = _write_config(tmp_path, "ip.json", {
            "command": "indep-power", "seed": 2, "out": str(tmp_path / "ip"),
            "n": 30, "replications": 8, "k_grid": [0.0, 2.0], "noise": "gaussian",
        })
        [path] = run_indep_power(ExperimentConfig.from_file(cfg_path))
        header, rows = _rows(path)
        assert header[:2] == ["k", "k_hex"]
        assert len(rows) == 2
        for r in rows:
            assert 0.0 <= float(r[header.index("rejection_rate")]) <= 1.0

    def test_requires_exactly_one_grid(self, tmp_path):
        cfg_path = _write_config(tmp_path, "ip2.json", {
            "command": "indep-power", "seed": 2, "out": str(tmp_path / "ip2"),
            "replications": 4,
        })
        with pytest.raises(ConfigError, match="exactly one"):
            run_indep_power(ExperimentConfig.from_file(cfg_path))

    def test_model_produces_valid_pairs(self):
        xs, ys = spd_response_pairs(0.8, 25, rng_for(3), noise="cauchy")
        assert len(xs) == len(ys) == 25
        from metricquantiles.spaces import SpdSpace
        for y in ys:
            SpdSpace(2).validate(y)

    def test_null_model_y_independent_of_x(self):
        # k = 0: Y is a function of eps only; regenerating X leaves Y fixed
        _, ys_a = spd_response_pairs(0.0, 10, rng_for(4), noise="gaussian")
        _, ys_b = spd_response_pairs(0.0, 10, rng_for(4), noise="gaussian")
        for a, b in zip(ys_a, ys_b):
            np.testing.assert_array_equal(a, b)


class TestConfigValidation:
    def test_bad_schema_version(self, tmp_path):
        path = _write_config(tmp_path, "c.json", {"command": "breakdown", "seed": 1,
                                                  "out": str(tmp_path)})
        payload = json.loads(path.read_text())
        payload["schema_version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(ConfigError, match="schema_version"):
            ExperimentConfig.from_file(path)

    def test_unknown_command(self, tmp_path):
        path = _write_config(tmp_path, "c.json", {"command": "frobnicate", "seed": 1,
                                                  "out": str(tmp_path)})
        with pytest.raises(ConfigError, match="unknown command"):
            ExperimentConfig.from_file(path)

    def test_seed_range(self, tmp_path):
        path = _write_config(tmp_path, "c.json", {"command": "breakdown", "seed": -1,
                                                  "out": str(tmp_path)})
        with pytest.raises(ConfigError, match="64-bit"):
            ExperimentConfig.from_file(path)

    def test_missing_required_key(self, tmp_path):
        path = _write_config(tmp_path, "c.json", {"command": "robustness", "seed": 1,
                                                  "out": str(tmp_path / "o"),
                                                  "replications": 2})
        cfg = ExperimentConfig.from_file(path)
        with pytest.raises(ConfigError, match="missing required key"):
            run_experiment(cfg)

    def test_command_mismatch(self, tmp_path):
        path = _write_config(tmp_path, "c.json", {"command": "breakdown", "seed": 1,
                                                  "out": str(tmp_path)})
        with pytest.raises(ConfigError, match="invoked"):
            ExperimentConfig.from_file(path, command="robustness")


class TestCli:
    def test_quantile_map_exit_zero(self, tmp_path, quantile_map_config, capsys):
        assert main(["quantile-map", "--config", str(quantile_map_config)]) == 0
        out = capsys.readouterr().out
        assert "quantile_map.csv" in out

    def test_seed_override_changes_artifact(self, tmp_path, quantile_map_config):
        main(["quantile-map", "--config", str(quantile_map_config)])
        cfg = ExperimentConfig.from_file(quantile_map_config)
        first = (cfg.out / "quantile_map.csv").read_text()
        main(["quantile-map", "--config", str(quantile_map_config), "--seed", "12"])
        second = (cfg.out / "quantile_map.csv").read_text()
        assert first != second
        assert "# seed: 12" in second

    def test_config_error_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"schema_version\": 1}")
        assert main(["breakdown", "--config", str(bad)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_two(self, tmp_path):
        assert main(["breakdown", "--config", str(tmp_path / "nope.json")]) == 2

    def test_convert_round_trip(self, tmp_path, rng):
        from conftest import rand_points
        from metricquantiles.dataio import write_dataset
        space = EuclideanSpace(2)
        src = write_dataset(tmp_path / "d.csv", space, rand_points(space, 5, rng))
        assert main(["convert", str(src), str(tmp_path / "d.json")]) == 0
        assert main(["convert", str(tmp_path / "d.json"), str(tmp_path / "e.csv")]) == 0
        assert (tmp_path / "d.csv").read_text() == (tmp_path / "e.csv").read_text()

    def test_convert_bad_input_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "x.csv"
        bad.write_text("not a dataset\n")
        assert main(["convert", str(bad), str(tmp_path / "y.json")]) == 2


class TestDatasetPersistence:
    def test_save_dataset_includes_sampler_metadata(self, tmp_path):
        from metricquantiles.dataio import read_dataset
        cfg_path = _write_config(tmp_path, "qs.json", {
            "command": "quantile-map", "seed": 21, "out": str(tmp_path / "qs"),
            "n": 12, "save_dataset": True,
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
        })
        paths = run_quantile_map(ExperimentConfig.from_file(cfg_path))
        dataset = [p for p in paths if p.name == "dataset.csv"]
        assert dataset
        space, pts, meta = read_dataset(dataset[0])
        assert len(pts) == 12
        assert meta == {"sampler": {"family": "gaussian", "dim": 2}, "seed": 21, "n": 12}


class TestOneSidedFlag:
    def test_alternative_forwarded(self, tmp_path):
        cfg_path = _write_config(tmp_path, "ipa.json", {
            "command": "indep-power", "seed": 2, "out": str(tmp_path / "ipa"),
            "n": 30, "replications": 6, "k_grid": [0.0], "alternative": "greater",
        })
        [path] = run_indep_power(ExperimentConfig.from_file(cfg_path))
        assert "greater" in path.read_text()  # embedded via the config header


class TestRobustnessCurve:
    def test_clean_gaussian_median_stays_near_center(self):
        # alpha = 0 reference level of the contamination curve
        from metricquantiles.spaces import EuclideanSpace
        space = EuclideanSpace(3)
        dists = []
        for rep in range(400):
            pts = sampler_from_spec({"family": "gaussian", "dim": 3})(100, rng_for(2718, rep))
            med = QuantileEngine(space, pts).metric_median().point
            dists.append(float(np.linalg.norm(med)))
        assert np.mean(dists) < 0.35

    def test_mean_distance_trend_is_nondecreasing(self, tmp_path):
        from scipy.stats import spearmanr
        cfg_path = _write_config(tmp_path, "robc.json", {
            "command": "robustness", "seed": 314159, "out": str(tmp_path / "robc"),
            "n": 100, "replications": 100,
            "space": {"kind": "euclidean-lp", "dim": 3, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 3},
            "contaminant": {"family": "cauchy", "dim": 3},
            "center": [0.0, 0.0, 0.0],
            "contamination_grid": [0.0, 0.15, 0.3, 0.45],
        })
        [path] = run_robustness(ExperimentConfig.from_file(cfg_path))
        header, rows = _rows(path)
        alphas = [float(r[0]) for r in rows]
        means = [float(r[header.index("mean_distance")]) for r in rows]
        assert spearmanr(alphas, means).statistic >= 0.0


class TestSelectedQuantiles:
    def test_tau_grid_emits_selected_points(self, tmp_path):
        cfg_path = _write_config(tmp_path, "qt.json", {
            "command": "quantile-map", "seed": 3, "out": str(tmp_path / "qt"),
            "n": 40, "tau_grid": [0.0, 0.25, 0.5, 1.0],
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
        })
        paths = run_quantile_map(ExperimentConfig.from_file(cfg_path))
        sel = [p for p in paths if p.name == "selected_quantiles.csv"]
        assert sel
        header, rows = _rows(sel[0])
        assert len(rows) == 4
        for r in rows:
            tau = float(r[0])
            level = float(r[header.index("level")])
            assert level >= tau

    def test_bad_tau_rejected(self, tmp_path):
        cfg_path = _write_config(tmp_path, "qt2.json", {
            "command": "quantile-map", "seed": 3, "out": str(tmp_path / "qt2"),
            "n": 10, "tau_grid": [1.5],
            "space": {"kind": "euclidean-lp", "dim": 2, "q": 2.0},
            "sampler": {"family": "gaussian", "dim": 2},
        })
        with pytest.raises(ConfigError, match="tau"):
            run_quantile_map(ExperimentConfig.from_file(cfg_path))
