import json
import math

import numpy as np
import pytest

from ldprates.channels import PrivacyLevel
from ldprates.harness import (
    CSV_COLUMNS,
    Cell,
    ConfigError,
    alpha_sweep,
    config_from_dict,
    csv_path,
    fit_rate,
    load_config,
    load_results,
    make_report,
    parse_config,
    persist,
    rate_stability,
    run_cell,
    run_experiment,
)
from ldprates.models import loss


def uniform_cfg(tmp_path, **kw):
    raw = {
        "model": {"kind": "uniform", "theta": 1.0, "M": 1.0},
        "family": {"kind": "uniform_endpoint", "M": 1.0},
        "estimator": "sample_mean",
        "loss": {"tag": "power", "gamma": 2},
        "alphas": [math.log(3.0)],
        "ns": [64, 128, 256, 512],
        "replicates": 400,
        "seed": 11,
        "output": str(tmp_path / "out.jsonl"),
    }
    raw.update(kw)
    return config_from_dict(raw)


def cells_from(ns, risks, flag="ok"):
    return [Cell(1.0, int(n), float(r), 0.01 * float(r), flag, 0, 100, -1.0) for n, r in zip(ns, risks)]


class TestConfig:
    def test_defaults(self, tmp_path):
        cfg = uniform_cfg(tmp_path)
        assert cfg.shift == 0.0 and cfg.project is False and cfg.threads == 1
        assert cfg.loss == {"tag": "power", "gamma": 2}

    def test_load_round_trip(self, tmp_path):
        cfg = uniform_cfg(tmp_path, shift=0.25)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert load_config(str(path)) == cfg

    def test_malformed_json_line(self):
        text = '{\n  "model": {"kind": "uniform"},\n  "ns": [1, 2,,]\n}'
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == 3
        assert "line 3" in str(info.value)

    @pytest.mark.parametrize("change,path", [
        ({"replicates": 10}, "$.replicates"),
        ({"alphas": [1.0, "x"]}, "$.alphas[1]"),
        ({"estimator": "median"}, "$.estimator"),
        ({"loss": {"tag": "power", "gamma": -1}}, "$.loss.gamma"),
        ({"model": {"kind": "uniform", "theta": 2.0, "M": 1.0}}, "$.model"),
        ({"family": {"kind": "spline"}}, "$.family"),
        ({"ns": [64, 32, 128, 256]}, "$.ns"),
        ({"ns": [64, 128]}, "$.ns"),
        ({"colour": "red"}, "$"),
    ])
    def test_schema_errors(self, tmp_path, change, path):
        with pytest.raises(ConfigError) as info:
            uniform_cfg(tmp_path, **change)
        assert info.value.path == path

    def test_missing_required(self, tmp_path):
        cfg = uniform_cfg(tmp_path).to_dict()
        del cfg["seed"]
        with pytest.raises(ConfigError):
            config_from_dict(cfg)


class TestFitRate:
    def test_exact_power_law(self):
        ns = 2 ** np.arange(10, 18)
        fit = fit_rate(cells_from(ns, 15.0 / ns))
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(15.0), abs=1e-10)
        assert fit.cells == 8

    def test_constant(self):
        fit = fit_rate(cells_from(2 ** np.arange(4, 9), np.full(5, 0.3)))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_half_rate(self):
        rng = np.random.default_rng(0)
        ns = 2 ** np.arange(10, 18)
        fit = fit_rate(cells_from(ns, 3.0 * ns**-0.5 * (1 + 0.01 * rng.standard_normal(ns.size))))
        assert abs(fit.slope + 0.5) <= 0.02
        assert fit.slope_se > 0

    def test_flagged_cells_excluded(self):
        ns = 2 ** np.arange(4, 10)
        cells = cells_from(ns[:4], 1.0 / ns[:4]) + cells_from(ns[4:], [5.0, 7.0], flag="clamped")
        assert fit_rate(cells).slope == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            fit_rate(cells[:3])
        with pytest.raises(ValueError):
            fit_rate(cells_from(ns, [1, 1, 0, 1, 1, 1]))


class TestRun:
    def test_deterministic(self, tmp_path):
        cfg = uniform_cfg(tmp_path)
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        assert a.cells == b.cells
        c = run_experiment(config_from_dict({**cfg.to_dict(), "seed": 12}))
        assert a.cells != c.cells

    def test_serial_parallel_equivalence(self, tmp_path):
        cfg = uniform_cfg(tmp_path, replicates=3000, ns=[50, 100, 200, 400])
        assert run_experiment(cfg, threads=1).cells == run_experiment(cfg, threads=4).cells

    def test_uniform_exact_variance(self, tmp_path):
        cfg = uniform_cfg(tmp_path, replicates=4000)
        report = run_experiment(cfg)
        for c in report.cells:
            assert abs(c.risk - 15.0 / c.n) <= 4 * c.se
            assert c.se > 0 and c.flag == "ok" and c.replicates == 4000
        assert report.theory_slope == -1.0

    def test_doubling_halves_risk(self, tmp_path):
        cfg = uniform_cfg(tmp_path, replicates=20000, ns=[100, 200, 400, 800])
        cells = run_experiment(cfg).cells
        for a, b in zip(cells, cells[1:]):
            ratio = b.risk / a.risk
            assert abs(ratio - 0.5) <= 4 * 0.5 * math.hypot(a.se / a.risk, b.se / b.risk)

    def test_projection(self, tmp_path):
        free = run_cell(uniform_cfg(tmp_path), 0, 64)
        proj = run_cell(uniform_cfg(tmp_path, project=True), 0, 64)
        assert proj.risk < free.risk

    def test_binary_search(self, tmp_path):
        cfg = uniform_cfg(tmp_path, estimator="binary_search", replicates=500)
        report = run_experiment(cfg)
        assert all(np.isfinite(c.risk) and c.risk >= 0 for c in report.cells)
        cfg2 = uniform_cfg(tmp_path, estimator="binary_search", replicates=500, delta=0.05)
        assert run_experiment(cfg2).cells[0].risk >= 0

    def test_binary_search_needs_delta(self, tmp_path):
        cfg = config_from_dict({
            "model": {"kind": "moment", "variant": "bounded", "eps": 0.1},
            "family": {"kind": "truncated_moment", "kappa": 2.0, "L": 1.0},
            "estimator": "binary_search", "loss": {}, "alphas": [1.0], "ns": [10, 20, 40, 80],
            "replicates": 100, "seed": 0, "output": str(tmp_path / "x.jsonl"), "range": [0, 1]})
        with pytest.raises(ConfigError):
            run_cell(cfg, 0, 10)

    def test_heavy_tail_worst_case(self, tmp_path):
        cfg = config_from_dict({
            "model": {"kind": "moment", "variant": "heavy", "kappa": 2.0, "L": 2.0, "eps_scale": 1.0},
            "family": {"kind": "truncated_moment", "kappa": 2.0, "L": 2.0},
            "estimator": "sample_mean", "loss": {"tag": "power", "gamma": 2},
            "alphas": [1.0], "ns": [100, 400, 1600, 6400], "replicates": 300, "seed": 3,
            "output": str(tmp_path / "x.jsonl")})
        report = run_experiment(cfg)
        assert report.theory_slope == pytest.approx(-0.5)
        assert all(c.risk > 0 for c in report.cells)


class TestPersistence:
    def test_byte_identical(self, tmp_path):
        cfg = uniform_cfg(tmp_path)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        persist(run_experiment(cfg), str(p1))
        persist(run_experiment(cfg), str(p2))
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert b"\r" not in p1.read_bytes()

    def test_round_trip(self, tmp_path):
        report = run_experiment(uniform_cfg(tmp_path))
        path = tmp_path / "r.jsonl"
        persist(report, str(path))
        again = load_results(str(path))
        assert again.cells == report.cells
        assert again.fits == report.fits
        rec = json.loads(path.read_text().splitlines()[0])
        assert {"alpha", "n", "risk", "se", "flag", "seed"} <= set(rec)
        header = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        assert csv_path("dir/x.jsonl") == "dir/x.csv"

    def test_bad_record_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"alpha": 1, "n": 2, "risk": 0.1, "se": 0.01, "flag": "ok", "seed": 0}\n{"alpha": 1}\n')
        with pytest.raises(ConfigError) as info:
            load_results(str(path))
        assert info.value.line == 2

    def test_report_fits(self):
        ns = 2 ** np.arange(6, 11)
        report = make_report(cells_from(ns, 2.0 / ns))
        assert report.fits[1.0].slope == pytest.approx(-1.0)


class TestRegimes:
    def test_rate_stability(self, tmp_path):
        cfg = uniform_cfg(tmp_path, replicates=3000, ns=[64, 128, 256, 512, 1024])
        cells = run_experiment(cfg).cells
        assert all(rate_stability(cells, 0.0, loss("power", 2), PrivacyLevel(math.log(3.0))))

    def test_rate_stability_detects_slow_decay(self):
        ns = 2 ** np.arange(6, 11)
        cells = cells_from(ns, 1.0 / np.sqrt(ns))
        assert not all(rate_stability(cells, 0.0, loss("power", 2), PrivacyLevel(1.0)))

    def test_alpha_sweep_small_alpha(self, tmp_path):
        cfg = uniform_cfg(tmp_path, alphas=[0.05, 0.1], replicates=20000)
        rows = alpha_sweep(cfg, base_n=200)
        assert [r.alpha for r in rows] == [0.1, 0.05]
        assert rows[0].n == 200 and rows[0].ratio == 1.0
        assert rows[1].n == round(200 * math.expm1(0.1) ** 2 / math.expm1(0.05) ** 2)
        # exact ratio ((e^0.05 + 1) / (e^0.1 + 1))^2 up to O(alpha^2) is about 0.949
        assert abs(rows[1].ratio - 1) <= 0.10
        assert rows[1].flag == "ok"

    def test_alpha_sweep_single(self, tmp_path):
        rows = alpha_sweep(uniform_cfg(tmp_path, alphas=[0.1]), base_n=100)
        assert len(rows) == 1 and rows[0].ratio is None

    def test_alpha_sweep_flags_large_alpha(self, tmp_path):
        rows = alpha_sweep(uniform_cfg(tmp_path, alphas=[0.5, 3.0]), base_n=50)
        assert rows[0].flag == "regime" and rows[1].flag == "ok"
