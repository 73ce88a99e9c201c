"""End-to-end tests of the command line on a small synthetic dataset."""

import json
import os

import pytest

from raingap.cli import main
from raingap.dataset import load_dataset
from raingap.preprocess import make_folds

from conftest import TINY_GRIDS, TINY_IMPUTER

ENV_NAMES = ("RAINGAP_THREADS", "RAINGAP_SEED", "RAINGAP_LOG_LEVEL", "RAINGAP_OUTPUT_DIR")


@pytest.fixture
def workdir(monkeypatch, tmp_path):
    """Private environment, an empty .env file and a small run config."""
    monkeypatch.setattr(os, "environ", os.environ.copy())
    for name in ENV_NAMES:
        monkeypatch.delenv(name, raising=False)
    (tmp_path / ".env").write_text("")
    (tmp_path / "run.json").write_text(json.dumps({"folds": 3, "imputer": TINY_IMPUTER}))
    grid = {"grid_version": "test", "grids": {"knn": {task: TINY_GRIDS["knn"] for task in ("classify", "regress")}}}
    (tmp_path / "grid.json").write_text(json.dumps(grid))
    return tmp_path


def run(workdir, *argv):
    common = ["--env", str(workdir / ".env"), "--config", str(workdir / "run.json")]
    with pytest.raises(SystemExit) as excinfo:
        main([argv[0], *common, *argv[1:]])
    return excinfo.value.code


class TestExitCodes:
    def test_missing_dataset_is_a_data_error(self, workdir, capsys):
        code = run(workdir, "tune", "--dataset", str(workdir / "absent"), "--site", "S01", "--store", "s.json")
        assert code == 3
        assert "❌" in capsys.readouterr().out

    def test_missing_config_file_is_a_config_error(self, workdir):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--env", str(workdir / ".env"), "--config", str(workdir / "nope.json"), "--out", "x"])
        assert excinfo.value.code == 2

    def test_unknown_site(self, workdir):
        data = workdir / "data"
        assert run(workdir, "synth", "--sites", "1", "--gauges", "2", "--days", "2", "--out", str(data)) == 0
        code = run(workdir, "tune", "--dataset", str(data), "--site", "S07", "--store", str(workdir / "s.json"))
        assert code == 3


class TestPipeline:
    def test_synth_tune_impute_baseline_compare_export_summary(self, workdir, capsys):
        data = workdir / "data"
        store = workdir / "store.json"
        plan = workdir / "plan.json"
        hurdle = workdir / "hurdle.json"
        baseline = workdir / "baseline.json"

        assert run(workdir, "synth", "--sites", "1", "--gauges", "4", "--days", "14", "--out", str(data)) == 0
        assert (data / "catalog.csv").exists()

        assert (
            run(
                workdir, "tune", "--dataset", str(data), "--site", "S01", "--grid", str(workdir / "grid.json"),
                "--families", "knn", "--store", str(store),
            )
            == 0
        )
        tuned = json.loads(store.read_text())
        assert set(tuned["sites"]["S01"]["knn"]) == {"classify", "regress"}
        assert tuned["grid_version"] == "test"

        assert (
            run(
                workdir, "impute", "--dataset", str(data), "--site", "S01", "--families", "knn",
                "--store", str(store), "--foldplan-out", str(plan), "--models-out", str(workdir / "models"),
                "--report", str(hurdle),
            )
            == 0
        )
        assert json.loads(plan.read_text())["n_folds"] == 3
        assert (workdir / "models" / "fold0_classify.joblib").exists()
        assert "timing" not in json.loads(hurdle.read_text())["manifest"]

        assert (
            run(
                workdir, "baseline", "--dataset", str(data), "--site", "S01", "--foldplan", str(plan),
                "--candidates", "2,3", "--report", str(baseline),
            )
            == 0
        )
        assert json.loads(baseline.read_text())["fold_plan"] == json.loads(hurdle.read_text())["fold_plan"]

        deltas = workdir / "deltas.json"
        assert run(workdir, "compare", str(hurdle), str(baseline), "--out", str(deltas)) == 0
        assert set(json.loads(deltas.read_text())["deltas"]) >= {"rmse", "acc"}

        series = workdir / "series.csv"
        assert run(workdir, "export", "--report", str(hurdle), "--out", str(series)) == 0
        assert series.read_text().startswith("timestamp,precipitation_truth,precipitation_prediction")

        assert run(workdir, "summary", str(hurdle), "--out", str(workdir / "summary.json")) == 0
        assert json.loads((workdir / "summary.json").read_text())["classifiers"] == {"knn": 1}

        out = capsys.readouterr().out
        assert out.count("✅") == 7
        assert "❌" not in out

    def test_reports_on_different_plans_do_not_compare(self, workdir):
        data = workdir / "data"
        assert run(workdir, "synth", "--sites", "1", "--gauges", "3", "--days", "4", "--out", str(data)) == 0

        tables, _ = load_dataset(data)
        n = int(tables["S01"].present_target.sum())
        for seed in (1, 2):
            make_folds(n, 3, seed).save(workdir / f"plan{seed}.json")
            assert (
                run(
                    workdir, "baseline", "--dataset", str(data), "--site", "S01",
                    "--foldplan", str(workdir / f"plan{seed}.json"), "--report", str(workdir / f"b{seed}.json"),
                )
                == 0
            )
        code = run(workdir, "compare", str(workdir / "b1.json"), str(workdir / "b2.json"))
        assert code == 3

    def test_default_paths_follow_the_output_directory(self, workdir):
        out = workdir / "out"
        (workdir / ".env").write_text(f"RAINGAP_OUTPUT_DIR={out}\n")
        data = workdir / "data"
        assert run(workdir, "synth", "--sites", "1", "--gauges", "3", "--days", "4", "--out", str(data)) == 0

        tables, _ = load_dataset(data)
        make_folds(int(tables["S01"].present_target.sum()), 3, 5).save(workdir / "plan.json")
        code = run(workdir, "baseline", "--dataset", str(data), "--site", "S01", "--foldplan", str(workdir / "plan.json"))
        assert code == 0
        assert (out / "S01_baseline.json").exists()

        assert run(workdir, "export", "--report", str(out / "S01_baseline.json")) == 0
        assert (out / "S01_baseline_series.csv").exists()
