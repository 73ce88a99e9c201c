"""Tests for settings resolution and grid loading."""

import json
import os
from pathlib import Path

import pytest

from raingap.config import Settings, load_grid, load_settings
from raingap.const import DESK_GRID_VERSION, DESK_GRIDS, FULL_GRID_VERSION
from raingap.exceptions import ConfigError

CONFIG_DIR = Path(__file__).parent.parent / "configs"
ENV_NAMES = ("RAINGAP_THREADS", "RAINGAP_SEED", "RAINGAP_LOG_LEVEL", "RAINGAP_OUTPUT_DIR")


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """Private environment plus an empty .env file."""
    monkeypatch.setattr(os, "environ", os.environ.copy())
    for name in ENV_NAMES:
        monkeypatch.delenv(name, raising=False)
    env_file = tmp_path / ".env"
    env_file.write_text("")
    return env_file


class TestSettings:
    def test_defaults(self):
        settings = Settings()
        assert (settings.threads, settings.seed, settings.folds) == (1, 42, 5)
        assert settings.grid_version == FULL_GRID_VERSION
        assert settings.surface["prune_threshold"] == 0.001

    @pytest.mark.parametrize(
        "values",
        [
            {"bogus": 1},
            {"imputer": {"bogus": 1}},
            {"imputer": 3},
            {"threads": 0},
            {"grids": {"lasso": {}}},
            {"grids": {"network": {"regress": {"dropout": [0.1]}}}},
        ],
    )
    def test_rejected_updates(self, values):
        with pytest.raises(ConfigError):
            Settings().update(values)

    def test_override_ignores_unset_flags(self):
        settings = Settings().override(seed=None, threads=3, folds=None)
        assert settings.threads == 3
        assert settings.seed == 42

    def test_grid_override_keeps_other_families(self):
        settings = Settings()
        settings.update({"grids": {"knn": {"classify": {"n_neighbours": [3], "leaf_size": [1], "algorithm": ["brute"]}}}})
        assert settings.grids["knn"]["classify"]["n_neighbours"] == [3]
        assert settings.grids["knn"]["regress"]["n_neighbours"] == [5, 7, 9]

    def test_snapshot_is_a_copy(self):
        settings = Settings()
        snapshot = settings.snapshot()
        snapshot["imputer"]["max_rounds"] = 99
        assert settings.imputer["max_rounds"] == 10
        json.dumps(snapshot)


class TestLoadSettings:
    def test_environment_then_file(self, clean_env, monkeypatch, tmp_path):
        clean_env.write_text("RAINGAP_THREADS=3\nRAINGAP_SEED=99\nRAINGAP_LOG_LEVEL=debug\n")
        monkeypatch.setenv("RAINGAP_SEED", "7")
        settings = load_settings(env_file=clean_env)
        # process environment wins over the .env file
        assert (settings.threads, settings.seed, settings.log_level) == (3, 7, "DEBUG")

        config = tmp_path / "run.json"
        config.write_text(json.dumps({"seed": 5, "forest": {"max_samples": 500}}))
        settings = load_settings(config_file=config, env_file=clean_env)
        assert settings.seed == 5
        assert settings.forest["max_samples"] == 500

    def test_invalid_environment_integer(self, clean_env, monkeypatch):
        monkeypatch.setenv("RAINGAP_THREADS", "many")
        with pytest.raises(ConfigError):
            load_settings(env_file=clean_env)

    def test_config_file_errors(self, clean_env, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(config_file=tmp_path / "absent.json", env_file=clean_env)
        broken = tmp_path / "broken.json"
        broken.write_text("{")
        with pytest.raises(ConfigError):
            load_settings(config_file=broken, env_file=clean_env)

    def test_shipped_desk_config(self, clean_env):
        settings = load_settings(config_file=CONFIG_DIR / "desk.json", env_file=clean_env)
        assert settings.grid_version == DESK_GRID_VERSION
        assert settings.grids["forest"]["classify"]["n_estimators"] == [100]
        assert settings.imputer["n_estimators"] == 20


class TestLoadGrid:
    def test_named_grids(self):
        assert load_grid("desk") == {"grids": DESK_GRIDS, "grid_version": DESK_GRID_VERSION}
        assert load_grid("full")["grid_version"] == FULL_GRID_VERSION

    def test_grid_file(self, tmp_path):
        path = tmp_path / "mini.json"
        path.write_text(json.dumps({"grids": {"network": {"regress": {"hidden_layers": [2]}}}}))
        grid = load_grid(str(path))
        assert grid["grid_version"] == "mini"
        assert grid["grids"]["network"]["regress"] == {"hidden_layers": [2]}

    def test_grid_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_grid(str(tmp_path / "absent.json"))
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"grids": {"svm": {"classify": {"C": []}}}}))
        with pytest.raises(ConfigError):
            load_grid(str(bad))
