import csv

import numpy as np
import pytest

from engd.cli import build_experiment, load_config, main
from engd.network import ParamVector, init_params, load_params
from engd.optim import OptimizerConfig, TrainRecord
from engd.problems import Poisson2D, RitzNonlinear1D
from engd.runner import (
    ExperimentConfig,
    emit_field_csv,
    read_trace_csv,
    run_experiment,
    summarize,
    summary_row,
    SUMMARY_COLUMNS,
)

TINY_RITZ = {"width": 4, "n_points": 101, "n_eval": 101}


def tiny_cfg(**kw):
    kw.setdefault("problem", "ritz1d")
    kw.setdefault("problem_overrides", dict(TINY_RITZ))
    kw.setdefault("optimizer", OptimizerConfig(kind="engd", max_iters=2))
    kw.setdefault("seeds", (0, 1))
    return ExperimentConfig(**kw)


def fake_record(l2, h1):
    return TrainRecord(rows=[(0, 1.0, l2, h1, 0.0, 0.0)], final_params=np.zeros(3))


class TestSummaryStats:
    def test_order_statistics(self):
        records = [fake_record(l2, l2 + 1) for l2 in (0.3, 0.1, 0.2)]
        row = summary_row("engd", records)
        assert row["median_rel_l2"] == 0.2
        assert row["min_rel_l2"] == 0.1
        assert row["max_rel_l2"] == 0.3
        assert row["median_rel_h1"] == 1.2

    def test_single_seed_zero_iters(self, tmp_path):
        cfg = tiny_cfg(seeds=(0,), optimizer=OptimizerConfig(kind="engd", max_iters=0), out_dir=tmp_path)
        records, row = run_experiment(cfg)
        init_err = records[0].rows[0][2]
        assert row["median_rel_l2"] == row["min_rel_l2"] == row["max_rel_l2"] == init_err


class TestRunExperiment:
    def test_artifacts_written(self, tmp_path):
        cfg = tiny_cfg(out_dir=tmp_path)
        run_experiment(cfg)
        assert (tmp_path / "ritz1d_engd_seed0.csv").exists()
        assert (tmp_path / "ritz1d_engd_seed1.csv").exists()
        assert (tmp_path / "ritz1d_engd_seed0_params.txt").exists()
        assert (tmp_path / "summary.csv").exists()

    def test_trace_csv_round_trip(self, tmp_path):
        cfg = tiny_cfg(out_dir=tmp_path)
        records, _ = run_experiment(cfg)
        header, rows = read_trace_csv(tmp_path / "ritz1d_engd_seed0.csv")
        assert header == ["iteration", "loss", "rel_l2", "rel_h1", "eta_star", "wall_ms"]
        assert len(rows) == len(records[0].rows)
        assert rows[0][0] == 0.0

    def test_checkpoint_matches_final_params(self, tmp_path):
        cfg = tiny_cfg(out_dir=tmp_path, seeds=(3,))
        records, _ = run_experiment(cfg)
        loaded = load_params(tmp_path / "ritz1d_engd_seed3_params.txt")
        assert np.array_equal(loaded.values, records[3].final_params)

    def test_determinism_byte_identical_modulo_wall(self, tmp_path):
        # wall_ms is measured time; every other byte must repeat exactly
        cfg_a = tiny_cfg(out_dir=tmp_path / "a")
        cfg_b = tiny_cfg(out_dir=tmp_path / "b")
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        for name in ("ritz1d_engd_seed0.csv", "ritz1d_engd_seed1.csv"):
            rows_a = list(csv.reader(open(tmp_path / "a" / name)))
            rows_b = list(csv.reader(open(tmp_path / "b" / name)))
            stripped_a = [row[:5] for row in rows_a]
            stripped_b = [row[:5] for row in rows_b]
            assert stripped_a == stripped_b
        s_a = (tmp_path / "a" / "summary.csv").read_bytes()
        s_b = (tmp_path / "b" / "summary.csv").read_bytes()
        assert s_a == s_b

    def test_summary_merges_optimizers(self, tmp_path):
        run_experiment(tiny_cfg(out_dir=tmp_path))
        run_experiment(tiny_cfg(out_dir=tmp_path, optimizer=OptimizerConfig(kind="gd", max_iters=2)))
        with open(tmp_path / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {row["optimizer"] for row in rows} == {"engd", "gd"}

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(ValueError):
            tiny_cfg(seeds=(1, 1))

    def test_empty_seeds_rejected(self):
        with pytest.raises(ValueError):
            tiny_cfg(seeds=())

    def test_parallel_matches_serial(self, tmp_path):
        serial, _ = run_experiment(tiny_cfg())
        parallel, _ = run_experiment(tiny_cfg(workers=2))
        for seed in (0, 1):
            assert np.array_equal(serial[seed].final_params, parallel[seed].final_params)


class TestSummarize:
    def test_recomputes_from_traces(self, tmp_path):
        _, row = run_experiment(tiny_cfg(out_dir=tmp_path))
        rows = summarize(tmp_path)
        assert len(rows) == 1
        got = rows[0]
        assert got["optimizer"] == "engd"
        for col in SUMMARY_COLUMNS[1:]:
            assert got[col] == pytest.approx(row[col], rel=1e-12)

    def test_empty_dir(self, tmp_path):
        assert summarize(tmp_path) == []


class TestEmitFieldCsv:
    def make_problem(self):
        return RitzNonlinear1D(**TINY_RITZ)

    def test_normalization_contract(self, tmp_path):
        p = self.make_problem()
        params = init_params(p.arch, 0)
        out = tmp_path / "fields.csv"
        meta = emit_field_csv(params, p, out)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        for name in ("residual", "engd_pushforward", "grad_pushforward"):
            vals = np.array([float(r[name]) for r in rows])
            if not meta[name]["zero"]:
                assert np.abs(vals).max() == pytest.approx(1.0, abs=1e-12)
            assert np.abs(vals).max() <= 1.0 + 1e-12

    def test_zero_function_flagged(self, tmp_path):
        # a network matching u* exactly is unavailable; instead check the flag
        # machinery with the zero direction: a critical-point gradient field
        p = self.make_problem()
        arch = p.arch

        class Frozen(RitzNonlinear1D):
            def exact(self, points):
                return np.zeros(points.shape[0])

            def exact_grad(self, points):
                return np.zeros((points.shape[0], 1))

            def assemble(self, theta, need_grams=frozenset(("energy",))):
                out = super().assemble(theta, need_grams)
                out.grad = np.zeros_like(out.grad)
                return out

        q = Frozen(**TINY_RITZ)
        params = ParamVector(arch, np.zeros(arch.param_count))
        meta = emit_field_csv(params, q, tmp_path / "fields.csv")
        assert meta["residual"]["zero"]
        assert meta["grad_pushforward"]["zero"]
        meta_rows = list(csv.reader(open(tmp_path / "fields_meta.csv")))
        assert meta_rows[0] == ["field", "scale", "zero_function"]
        assert any(row[0] == "residual" and row[2] == "1" for row in meta_rows[1:])

    def test_engd_pushforward_tracks_residual_better_than_gradient(self, tmp_path):
        # at a random init the energy-NG direction's function-space image should
        # align with u_theta - u* better than the raw gradient's image does
        p = self.make_problem()
        params = init_params(p.arch, 1)
        out = tmp_path / "fields.csv"
        emit_field_csv(params, p, out)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        res = np.array([float(r["residual"]) for r in rows])
        engd = np.array([float(r["engd_pushforward"]) for r in rows])
        grad = np.array([float(r["grad_pushforward"]) for r in rows])

        def cos(u, v):
            return abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))

        assert cos(engd, res) > cos(grad, res)


class TestCli:
    def test_config_file_parsing(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# comment\n"
            "problem = ritz1d\n"
            "optimizer.kind = adam\n"
            "optimizer.max_iters = 12\n"
            "adam.lr0 = 0.01\n"
            "seeds = 2,5\n"
            "problem.width = 4\n"
        )
        cfg = load_config(cfg_file)
        exp = build_experiment(cfg)
        assert exp.problem == "ritz1d"
        assert exp.optimizer.kind == "adam"
        assert exp.optimizer.max_iters == 12
        assert exp.optimizer.adam.lr0 == 0.01
        assert exp.seeds == (2, 5)
        assert exp.problem_overrides == {"width": 4}

    def test_config_rejects_malformed_line(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("problem ritz1d\n")
        with pytest.raises(ValueError, match="key = value"):
            load_config(bad)

    def test_chain_parsing(self):
        exp = build_experiment({"chain": "adam:100,engd:50", "problem": "ritz1d"})
        assert exp.optimizer.phases() == (("adam", 100), ("engd", 50))

    def test_run_command_end_to_end(self, tmp_path, capsys):
        out = tmp_path / "exp"
        code = main([
            "run", "--problem", "ritz1d", "--optimizer", "engd", "--iters", "1",
            "--seeds", "2", "--out", str(out), "--config", str(self._tiny_cfg(tmp_path)),
        ])
        assert code == 0
        assert (out / "summary.csv").exists()
        assert "rel L2 median" in capsys.readouterr().out

    def test_summarize_command(self, tmp_path, capsys):
        out = tmp_path / "exp"
        main([
            "run", "--problem", "ritz1d", "--optimizer", "engd", "--iters", "1",
            "--seeds", "1", "--out", str(out), "--config", str(self._tiny_cfg(tmp_path)),
        ])
        code = main(["summarize", str(out)])
        assert code == 0
        assert "engd" in capsys.readouterr().out

    def test_fields_command(self, tmp_path, capsys):
        out = tmp_path / "exp"
        main([
            "run", "--problem", "ritz1d", "--optimizer", "engd", "--iters", "1",
            "--seeds", "1", "--out", str(out), "--config", str(self._tiny_cfg(tmp_path)),
        ])
        code = main([
            "fields", "--checkpoint", str(out / "ritz1d_engd_seed0_params.txt"),
            "--problem", "ritz1d", "--out", str(out),
        ])
        assert code == 0
        assert (out / "ritz1d_fields.csv").exists()

    @staticmethod
    def _tiny_cfg(tmp_path):
        path = tmp_path / "tiny.cfg"
        if not path.exists():
            path.write_text("problem.width = 4\nproblem.n_points = 101\nproblem.n_eval = 101\n")
        return path
