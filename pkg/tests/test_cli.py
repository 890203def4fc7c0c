import json

import pytest

from fairshift import cli, experiment


@pytest.fixture
def config_path(tmp_path):
    cfg = {
        "methods": ["MLP", "RFR"],
        "lambda_grid": [1.0],
        "seeds": [0],
        "dataset": {
            "kind": "toy", "n": 240, "seed": 3,
            "mean0": [1.0, 0.0], "mean1": [-1.0, 0.0],
            "cov0": [[1.0, 0.0], [0.0, 1.0]], "cov1": [[1.0, 0.0], [0.0, 1.0]],
            "label_coef": [0.9, 1.3], "label_intercept": -1.0, "group1_shift": -1.0,
        },
        "shift": {"kind": "synthetic", "alpha": 1.0, "beta": 2.0,
                  "n_source": 70, "n_target": 70, "seed": 5},
        "train": {"epochs": 3, "lr": 1e-3, "rho": 0.05, "p": 2.0, "hidden": [4]},
        "out": str(tmp_path / "run"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestRun:
    def test_run_writes_records_and_exits_zero(self, config_path, tmp_path, capsys):
        assert cli.main(["run", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "MLP" in out and "RFR" in out
        records = experiment.load_records(tmp_path / "run" / "records.jsonl")
        assert len(records) == 2

    def test_flag_overrides_reach_the_records(self, config_path, tmp_path):
        assert cli.main(["run", str(config_path), "--seed", "9", "--rho", "0.2",
                         "--lambda", "0.5", "--out", str(tmp_path / "other")]) == 0
        records = experiment.load_records(tmp_path / "other" / "records.jsonl")
        assert {r["seed"] for r in records} == {9}
        rfr = [r for r in records if r["method"] == "RFR"][0]
        assert rfr["config"]["rho"] == 0.2
        assert rfr["lambda"] == 0.5

    def test_missing_dataset_path_names_the_key(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"shift": {"kind": "synthetic"},
                                    "train": {"rho": 0.1, "p": 2}}))
        assert cli.main(["run", str(path)]) == cli.EXIT_USAGE
        assert "dataset" in capsys.readouterr().err

    def test_missing_csv_file_is_a_data_error(self, tmp_path, capsys):
        cfg = {
            "dataset": {"kind": "csv", "path": str(tmp_path / "nope.csv"),
                        "schema": {"label_column": "y", "label_positive": "1",
                                   "sensitive_column": "a", "sensitive_group0": "0",
                                   "numeric_columns": ["x"]}},
            "shift": {"kind": "synthetic", "alpha": 1.0, "beta": 2.0},
            "train": {"rho": 0.1, "p": 2},
            "seeds": [0],
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli.main(["run", str(path)]) == cli.EXIT_DATA

    def test_unknown_flag_is_usage_error(self, config_path):
        with pytest.raises(SystemExit) as err:
            cli.main(["run", str(config_path), "--frobnicate"])
        assert err.value.code == cli.EXIT_USAGE


class TestGenShift:
    def test_materializes_disjoint_split(self, config_path, tmp_path):
        out = tmp_path / "shifted"
        assert cli.main(["gen-shift", str(config_path), "--out", str(out)]) == 0
        assert (out / "source.csv").exists()
        assert (out / "target.csv").exists()
        note = json.loads((out / "shift.json").read_text())
        assert note["alpha"] == 1.0 and note["beta"] == 2.0


class TestReport:
    def test_aggregates_records(self, config_path, tmp_path, capsys):
        cli.main(["run", str(config_path)])
        capsys.readouterr()
        records_path = tmp_path / "run" / "records.jsonl"
        assert cli.main(["report", str(records_path), "--out", str(tmp_path / "agg")]) == 0
        out = capsys.readouterr().out
        assert "±" in out
        assert (tmp_path / "agg" / "summary.csv").exists()

    def test_empty_records_is_data_error(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert cli.main(["report", str(path)]) == cli.EXIT_DATA


class TestVerifyTheory:
    def test_small_subset_passes_and_prints(self, capsys, monkeypatch):
        # shrink the suites so the smoke test stays fast; full sizes run in
        # the acceptance module
        from fairshift import theory_suite

        def tiny_run_all(seed=0):
            return [
                theory_suite.dual_norm_suite(n_vectors=10, n_samples=2000, seed=seed),
                theory_suite.loss_equivalence_suite(n_instances=3, seed=seed),
                theory_suite.scalar_inequality_suite(n_tuples=10_000, seed=seed),
                theory_suite.bound_suite(n_trials=50, seed=seed),
            ]

        monkeypatch.setattr(cli.theory_suite, "run_all", tiny_run_all)
        assert cli.main(["verify-theory"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out
