"""
The five learner families behind one fit/predict interface.

Every family serves both tasks: ``classify`` (labels in {0, 1}, hard-label output) and
``regress`` (amplitudes in mm).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

import numpy as np

from ..const import (
    DEFAULT_BOOSTING,
    DEFAULT_FOREST,
    DEFAULT_KNN,
    DEFAULT_NETWORK,
    DEFAULT_SVM,
    FAMILY_BOOSTING,
    FAMILY_FOREST,
    FAMILY_KNN,
    FAMILY_NETWORK,
    FAMILY_ORDER,
    FAMILY_SVM,
    TASK_CLASSIFY,
    TASKS,
)
from ..exceptions import ConfigError, DataError, DegenerateModelError, SchemaMismatchError
from .boosting import BoostedModel, fit_boosting
from .forest import ForestModel, fit_forest
from .knn import KNNModel, fit_knn
from .network import NetworkModel, fit_network
from .svm import SVMModel, fit_svm

logger = logging.getLogger(__name__)

# Tuned hyperparameter names per family
PARAM_NAMES = {
    FAMILY_BOOSTING: ("min_child_weight", "subsample", "max_depth"),
    FAMILY_KNN: ("n_neighbours", "leaf_size", "algorithm"),
    FAMILY_FOREST: ("max_depth", "n_estimators", "min_samples_split", "min_samples_leaf"),
    FAMILY_SVM: ("C", "gamma", "kernel"),
    FAMILY_NETWORK: ("hidden_layers",),
}

# Fixed options per family, overridable from the config sections of the same name
DEFAULT_OPTIONS = {
    FAMILY_BOOSTING: dict(DEFAULT_BOOSTING),
    FAMILY_KNN: dict(DEFAULT_KNN),
    FAMILY_FOREST: dict(DEFAULT_FOREST),
    FAMILY_SVM: dict(DEFAULT_SVM),
    FAMILY_NETWORK: dict(DEFAULT_NETWORK),
}


def validate_params(
    family: str,
    task: str,
    params: Mapping[str, Any],
    grid: Optional[Mapping[str, list]] = None,
) -> Dict[str, Any]:
    """
    Check a parameter assignment against its family and, optionally, its grid.

    Raises:
        ConfigError: On an unknown family or task, missing or unknown keys, or off-grid values
    """
    if family not in FAMILY_ORDER:
        raise ConfigError(f"unknown learner family '{family}'")
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}'")
    expected = set(PARAM_NAMES[family])
    given = set(params)
    if given != expected:
        raise ConfigError(
            f"{family}/{task} parameters must be {sorted(expected)}, got {sorted(given)}"
        )
    if grid is not None:
        for name, value in params.items():
            if name in grid and value not in grid[name]:
                raise ConfigError(f"{family}/{task}: {name}={value!r} is not on the grid {grid[name]}")
    return dict(params)


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    task: str
    params: Dict[str, Any]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", validate_params(self.family, self.task, self.params))

    @property
    def label(self) -> str:
        """Family name, with the depth for networks, e.g. ``network(8)``."""
        if self.family == FAMILY_NETWORK:
            return f"{self.family}({self.params['hidden_layers']})"
        return self.family


@dataclass(frozen=True)
class FittedModel:
    spec: LearnerSpec
    model: Any
    n_features: int
    info: Dict[str, Any] = field(default_factory=dict)


def _check_inputs(spec: LearnerSpec, X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"{spec.family}: empty training matrix")
    if len(y) != X.shape[0]:
        raise DataError(f"{spec.family}: {X.shape[0]} rows but {len(y)} targets")
    if np.isnan(X).any() or np.isnan(y).any():
        raise DataError(f"{spec.family}: training data must be complete")
    if spec.task == TASK_CLASSIFY:
        labels = np.unique(y)
        if not set(labels.tolist()) <= {0.0, 1.0}:
            raise DataError(f"{spec.family}: classification labels must be 0 or 1")
        if labels.size < 2:
            raise DegenerateModelError(f"{spec.family}: single-class training set (class {int(labels[0])})")


def fit(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    options: Optional[Mapping[str, Any]] = None,
    n_jobs: int = 1,
) -> FittedModel:
    """
    Fit one learner.

    Args:
        spec: Family, task, tuned parameters and seed
        X: Complete training rows, normally min-max scaled
        y: Labels in {0, 1} (classify) or amplitudes (regress)
        options: Fixed family options overriding the defaults
        n_jobs: Worker threads (forests only)

    Returns:
        FittedModel

    Raises:
        DegenerateModelError: On a single-class classification set
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inputs(spec, X, y)
    opts = dict(DEFAULT_OPTIONS[spec.family])
    if options:
        opts.update({k: v for k, v in options.items() if k in opts})
    p = spec.params
    info: Dict[str, Any] = {}

    if spec.family == FAMILY_BOOSTING:
        model = fit_boosting(
            X,
            y,
            spec.task,
            max_depth=p["max_depth"],
            min_child_weight=float(p["min_child_weight"]),
            subsample=float(p["subsample"]),
            learning_rate=float(opts["learning_rate"]),
            n_rounds=int(opts["n_rounds"]),
            reg_lambda=float(opts["reg_lambda"]),
            seed=spec.seed,
        )
    elif spec.family == FAMILY_FOREST:
        model = fit_forest(
            X,
            y,
            spec.task,
            n_estimators=int(p["n_estimators"]),
            max_depth=p["max_depth"],
            min_samples_split=int(p["min_samples_split"]),
            min_samples_leaf=int(p["min_samples_leaf"]),
            seed=spec.seed,
            n_jobs=n_jobs,
            max_samples=opts["max_samples"],
        )
    elif spec.family == FAMILY_KNN:
        model = fit_knn(
            X,
            y,
            spec.task,
            n_neighbours=int(p["n_neighbours"]),
            leaf_size=int(p["leaf_size"]),
            algorithm=str(p["algorithm"]),
            weights=str(opts["weights"]),
        )
    elif spec.family == FAMILY_SVM:
        model, result = fit_svm(
            X,
            y,
            spec.task,
            C=float(p["C"]),
            gamma=float(p["gamma"]),
            kernel=str(p["kernel"]),
            epsilon=float(opts["epsilon"]),
            tol=float(opts["tol"]),
            max_train_rows=int(opts["max_train_rows"]),
            max_iter=int(opts["max_iter"]),
            seed=spec.seed,
        )
        info["iterations"] = result.iterations
        if model.subsampled_from is not None:
            info["svm_train_cap"] = {"rows": model.n_train, "of": model.subsampled_from}
    else:
        model = fit_network(
            X,
            y,
            spec.task,
            hidden_layers=int(p["hidden_layers"]),
            width=int(opts["width"]),
            epochs=int(opts["epochs"]),
            batch_size=int(opts["batch_size"]),
            learning_rate=float(opts["learning_rate"]),
            seed=spec.seed,
        )
    return FittedModel(spec=spec, model=model, n_features=X.shape[1], info=info)


def predict(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """
    Hard labels (classify) or amplitudes (regress).

    Raises:
        SchemaMismatchError: If X has a different column count than the training rows
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatchError(
            f"{model.spec.family}: model expects {model.n_features} features, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        return np.empty(0, dtype=int if model.spec.task == TASK_CLASSIFY else float)
    return model.model.predict(X)


__all__ = [
    "BoostedModel",
    "FittedModel",
    "ForestModel",
    "KNNModel",
    "LearnerSpec",
    "NetworkModel",
    "PARAM_NAMES",
    "SVMModel",
    "fit",
    "predict",
    "validate_params",
]
