"""Shared fixtures: a small synthetic dataset and cheap learner settings."""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from raingap.const import FAMILY_ORDER, TASKS  # noqa: E402
from raingap.hurdle import HurdleConfig  # noqa: E402
from raingap.synth import SynthConfig, generate  # noqa: E402
from raingap.tuning import TunedStore, enumerate_grid  # noqa: E402

TINY_GRIDS = {
    "boosting": {"min_child_weight": [1], "subsample": [1], "max_depth": [4]},
    "forest": {"max_depth": [8], "n_estimators": [5], "min_samples_split": [5], "min_samples_leaf": [3]},
    "knn": {"n_neighbours": [5], "leaf_size": [3], "algorithm": ["kd-tree"]},
    "svm": {"C": [10], "gamma": [0.1], "kernel": ["rbf"]},
    "network": {"hidden_layers": [2]},
}

TINY_OPTIONS = {
    "boosting": {"n_rounds": 10},
    "forest": {"max_samples": 200},
    "knn": {},
    "svm": {"max_train_rows": 400},
    "network": {"width": 8, "epochs": 5, "batch_size": 64, "learning_rate": 0.01},
}

TINY_IMPUTER = {"max_rounds": 3, "n_estimators": 5, "tol": 1e-6, "max_samples": 100}


@pytest.fixture(scope="session")
def synth_dataset():
    """Two sites with four gauges each over two weeks of 30-minute samples."""
    return generate(SynthConfig(n_sites=2, n_gauges=4, days=14, seed=7))


@pytest.fixture(scope="session")
def site_table(synth_dataset):
    return synth_dataset.tables[0]


@pytest.fixture(scope="session")
def tiny_grids():
    return {family: {task: dict(grid) for task in TASKS} for family, grid in TINY_GRIDS.items()}


def make_store(site_ids, families=FAMILY_ORDER):
    """Store holding the single tiny grid point of every family and task."""
    store = TunedStore(split_seed=11, grid_version="tiny")
    for site_id in site_ids:
        for family in families:
            params = enumerate_grid(family, TINY_GRIDS[family])[0]
            for task in TASKS:
                store.put(site_id, family, task, params, 0.0)
    return store


def make_config(families=("boosting", "knn"), n_folds=3, seed=11):
    return HurdleConfig(
        n_folds=n_folds,
        seed=seed,
        families=tuple(families),
        options={k: dict(v) for k, v in TINY_OPTIONS.items()},
        imputer=dict(TINY_IMPUTER),
    )
