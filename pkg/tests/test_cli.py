import csv
import importlib.resources as ir
import json
import os

import numpy as np
import pytest

from qpelab import cli


def small_config(**overrides):
    cfg = {
        "model": {"name": "zeeman", "params": {"omega": 3.8}},
        "algorithm": "pea",
        "R": 3,
        "shots": 512,
        "tau": {"start": 0.0, "stop": 1.0, "count": 12},
        "fit": {"model": "mu_wrapped", "tau_max": None, "slope_window": None},
        "estimator": "mean_direction",
        "trotter": "exact",
        "initial_state": "0",
        "seed": 4242,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_outputs(out_dir):
    files = {}
    for name in sorted(os.listdir(out_dir)):
        with open(os.path.join(out_dir, name), "rb") as fh:
            files[name] = fh.read()
    return files


class TestRunCommand:
    def test_record_and_csv_outputs(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out = tmp_path / "out"
        assert cli.main(["run", path, "--out", str(out)]) == 0
        record = json.loads((out / "record.json").read_text())
        assert record["seed_used"] == 4242
        run = record["runs"][0]
        assert len(run["points"]) == 12
        assert {"m", "dm", "b", "db", "chi2_per_ndf", "eps_hat"} <= set(run["fit"])
        with open(out / "points_0.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["tau", "estimate", "sigma", "counts_json"]
        assert len(rows) == 13
        with open(out / "fits.csv") as fh:
            fit_rows = list(csv.reader(fh))
        assert fit_rows[0][0] == "initial_state"
        assert len(fit_rows) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", path, "--out", str(out_a)]) == 0
        assert cli.main(["run", path, "--out", str(out_b)]) == 0
        assert read_outputs(out_a) == read_outputs(out_b)

    def test_seed_changes_output(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cli.main(["run", write_config(tmp_path, small_config(), "a.json"), "--out", str(out_a)])
        cli.main(
            ["run", write_config(tmp_path, small_config(seed=999), "b.json"), "--out", str(out_b)]
        )
        assert read_outputs(out_a) != read_outputs(out_b)

    def test_env_seed_override(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, small_config())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("QPELAB_SEED", "999")
        cli.main(["run", path, "--out", str(out_a)])
        record = json.loads((out_a / "record.json").read_text())
        assert record["seed_used"] == 999
        monkeypatch.delenv("QPELAB_SEED")
        cli.main(["run", path, "--out", str(out_b)])
        assert json.loads((out_b / "record.json").read_text())["seed_used"] == 4242

    def test_parallel_jobs_reproduce_serial_output(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", path, "--out", str(out_a)]) == 0
        assert cli.main(["run", path, "--out", str(out_b), "--jobs", "2"]) == 0
        assert read_outputs(out_a) == read_outputs(out_b)

    def test_multi_state_runs(self, tmp_path):
        cfg = small_config(
            model={"name": "ising", "params": {"w1": 0.33, "w2": 3.24, "wj": 1.17}},
            R=2,
            initial_state=["00", "11"],
        )
        out = tmp_path / "out"
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(out)]) == 0
        record = json.loads((out / "record.json").read_text())
        assert [r["initial_state"] for r in record["runs"]] == ["00", "11"]
        assert (out / "points_00.csv").exists()
        assert (out / "points_11.csv").exists()


class TestConfigErrors:
    def test_missing_field(self, tmp_path):
        cfg = small_config()
        del cfg["model"]
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_model(self, tmp_path):
        cfg = small_config(model={"name": "heisenberg", "params": {}})
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2

    def test_invalid_estimator_algorithm_combination(self, tmp_path):
        cfg = small_config(algorithm="ipea-nonexhaustive", estimator="mean_direction")
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2

    def test_exact_plan_for_noncommuting_model(self, tmp_path):
        cfg = small_config(
            model={"name": "hubbard_compact", "params": {"t": 0.35, "u": 0.2}},
            initial_state="ground",
            trotter="exact",
        )
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_qubit_budget_exit_code(self, tmp_path):
        cfg = small_config(
            model={"name": "ising", "params": {"w1": 1, "w2": 2, "wj": 0.5}},
            R=13,
            initial_state="00",
        )
        assert cli.main(["run", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


class TestBundledConfigs:
    def test_all_bundled_configs_validate(self):
        names = [
            "zeeman_R3.json",
            "ising_R2.json",
            "hubbard_ipea_R3.json",
            "hubbard_ipea_R4.json",
            "hubbard_ipea_R5.json",
            "hubbard_ipea_R6.json",
        ]
        for name in names:
            cfg = json.loads(ir.files("qpelab").joinpath(f"configs/{name}").read_text())
            norm = cli.validate_config(cfg)
            assert norm["taus"].shape[0] == 200

    def test_hubbard_tau_grid_symmetric_and_open(self):
        cfg = json.loads(
            ir.files("qpelab").joinpath("configs/hubbard_ipea_R4.json").read_text()
        )
        taus = cli.tau_grid(cfg["tau"])
        assert taus.shape == (200,)
        assert np.max(np.abs(taus)) < 5.0
        np.testing.assert_allclose(taus, -taus[::-1], atol=1e-12)
        assert np.sum(np.abs(taus) < 3.0) == 120


class TestAnalyze:
    def test_error_curves_table(self, tmp_path, capsys):
        out = tmp_path / "curves.csv"
        code = cli.main(
            ["analyze", "error-curves", "--r-min", "2", "--r-max", "3",
             "--density", "50", "--out", str(out)]
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["R", "phi", "majority_error", "mean_direction_error"]
        assert len(rows) == 1 + 2 * 50
        errs = np.array([[float(r[2]), float(r[3])] for r in rows[1:51]])
        assert errs[:, 0].max() < 2.0**-3  # R=2 majority bound
        assert errs[:, 1].max() < 2.0**-4  # R=2 mean-direction bound

    def test_dispersion_table_and_slope(self, tmp_path, capsys):
        out = tmp_path / "disp.csv"
        code = cli.main(
            ["analyze", "dispersion", "-R", "3", "--observations", "64", "256", "1024",
             "--samples", "2000", "--seed", "7", "--out", str(out)]
        )
        assert code == 0
        err = capsys.readouterr().err
        assert "slope" in err
        slope = float(err.strip().split("=")[-1])
        assert abs(slope + 0.5) < 0.05
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["R", "O", "total_executions", "sigma_mu_hat"]
        assert len(rows) == 4
        assert int(rows[1][2]) == 64 * 7  # O * (2^R - 1)

    def test_trotter_error_table(self, tmp_path, capsys):
        out = tmp_path / "trot.csv"
        code = cli.main(
            ["analyze", "trotter-error", "--order", "1", "2", "--points", "7",
             "--out", str(out)]
        )
        assert code == 0
        err_lines = capsys.readouterr().err.strip().splitlines()
        slopes = [float(line.split("=")[-1]) for line in err_lines]
        assert abs(slopes[0] - 2.0) < 0.1
        assert abs(slopes[1] - 3.0) < 0.1
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["order", "tau", "error_norm"]
        assert len(rows) == 1 + 2 * 7
