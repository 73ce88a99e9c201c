"""
Per-site hyperparameter grid search on a single random 70/30 split.

Classifiers are scored by accuracy on all rows with a binary target, regressors by R^2
on rain-only rows in mm (negative predictions clipped to 0). Every grid point is
evaluated on the same split; the first maximizer in enumeration order wins.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .const import FAMILY_ORDER, MIN_REGRESSION_ROWS, TASK_CLASSIFY, TASK_REGRESS, TASKS
from .dataset import SeriesTable
from .exceptions import ConfigError, RaingapError, TrainingDataError, TuningError
from .learners import PARAM_NAMES, LearnerSpec, fit, predict, validate_params
from .metrics import classification_metrics, regression_metrics
from .preprocess import apply_scaler, complete_case, fit_scaler, split_train_test, to_binary

logger = logging.getLogger(__name__)

STORE_FORMAT = 1


def enumerate_grid(family: str, grid: Mapping[str, list]) -> List[Dict[str, Any]]:
    """Grid points in enumeration order (last parameter varies fastest)."""
    if family not in PARAM_NAMES:
        raise ConfigError(f"unknown learner family '{family}'")
    unknown = set(grid) - set(PARAM_NAMES[family])
    if unknown:
        raise ConfigError(f"grid for {family} has unknown parameters {sorted(unknown)}")
    names = [n for n in PARAM_NAMES[family] if n in grid]
    missing = set(PARAM_NAMES[family]) - set(names)
    if missing:
        raise ConfigError(f"grid for {family} lacks values for {sorted(missing)}")
    return [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]


@dataclass(frozen=True)
class TuningSplit:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def tuning_split(table: SeriesTable, task: str, seed: int) -> TuningSplit:
    """
    Complete-case rows split 70/30, scaled with a scaler fitted on the 70 % part.

    Raises:
        TrainingDataError: Without feature columns, or with too few rain rows to regress
    """
    if table.features.shape[1] == 0:
        raise TrainingDataError(f"table {table.site_id}: no feature columns to tune on")
    rows = complete_case(table.features, table.target)
    X = table.features[rows]
    y = table.target[rows]
    if task == TASK_CLASSIFY:
        y = to_binary(y).astype(float)
    else:
        rain = y > 0
        if rain.sum() < MIN_REGRESSION_ROWS:
            raise TrainingDataError(
                f"table {table.site_id}: {int(rain.sum())} rain rows, need {MIN_REGRESSION_ROWS} to tune a regressor"
            )
        X, y = X[rain], y[rain]
    train, test = split_train_test(len(y), seed)
    scaler = fit_scaler(X[train])
    return TuningSplit(apply_scaler(scaler, X[train]), y[train], apply_scaler(scaler, X[test]), y[test])


def score_point(
    family: str,
    task: str,
    params: Mapping[str, Any],
    split: TuningSplit,
    seed: int,
    options: Optional[Mapping[str, Any]] = None,
) -> float:
    """Accuracy (%) of a classifier or R^2 of a regressor on the test part of a split."""
    model = fit(LearnerSpec(family, task, dict(params), seed), split.X_train, split.y_train, options)
    pred = predict(model, split.X_test)
    if task == TASK_CLASSIFY:
        return classification_metrics(split.y_test.astype(int), pred).accuracy
    r2, _ = regression_metrics(split.y_test, np.maximum(pred, 0.0))
    if r2 is None:
        raise TrainingDataError("R^2 undefined on a constant test target")
    return r2


def _evaluate(index: int, family: str, task: str, params: Dict[str, Any], split: TuningSplit, seed: int, options):
    try:
        score = score_point(family, task, params, split, seed, options)
        logger.debug(f"{family}/{task} point {index} {params}: score {score:.6g}")
        return index, score, None
    except (RaingapError, FloatingPointError, ValueError, np.linalg.LinAlgError) as e:
        logger.debug(f"{family}/{task} point {index} {params} failed: {e}")
        return index, None, f"{type(e).__name__}: {e}"


def grid_search(
    table: SeriesTable,
    family: str,
    task: str,
    seed: int,
    grid: Mapping[str, list],
    options: Optional[Mapping[str, Any]] = None,
    n_jobs: int = 1,
) -> Tuple[Dict[str, Any], float]:
    """
    Evaluate every grid point on one 70/30 split and return the best.

    Args:
        table: Prepared site table (features selected, missing targets removed)
        family: Learner family
        task: 'classify' or 'regress'
        seed: Split and learner seed
        grid: Parameter name -> candidate values
        options: Fixed family options
        n_jobs: Grid points evaluated in parallel

    Returns:
        (best parameter assignment, its score)

    Raises:
        TuningError: If every grid point fails, with per-point diagnostics
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}'")
    points = enumerate_grid(family, grid)
    split = tuning_split(table, task, seed)
    logger.info(f"Tuning {family}/{task} for {table.site_id}: {len(points)} grid points")
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_evaluate)(i, family, task, p, split, seed, options) for i, p in enumerate(points)
    )
    best_index = None
    best_score = -np.inf
    diagnostics = []
    for index, score, error in sorted(results, key=lambda r: r[0]):
        if score is None:
            diagnostics.append({"params": points[index], "error": error})
        elif score > best_score:
            best_index, best_score = index, score
    if best_index is None:
        raise TuningError(f"every {family}/{task} grid point failed for {table.site_id}", diagnostics)
    if diagnostics:
        logger.warning(f"{family}/{task}: {len(diagnostics)} of {len(points)} grid points failed")
    logger.info(f"Best {family}/{task} for {table.site_id}: {points[best_index]} (score {best_score:.4g})")
    return points[best_index], float(best_score)


@dataclass(frozen=True)
class TunedEntry:
    params: Dict[str, Any]
    score: float


@dataclass
class TunedStore:
    """Best parameters per (site or region, family, task)."""

    split_seed: int
    grid_version: str
    entries: Dict[Tuple[str, str, str], TunedEntry] = field(default_factory=dict)

    def put(
        self,
        site_id: str,
        family: str,
        task: str,
        params: Mapping[str, Any],
        score: float,
        grid: Optional[Mapping[str, list]] = None,
    ) -> None:
        """
        Record tuned parameters; with ``grid``, every value must be one of its points.

        Raises:
            ConfigError: If the parameters do not fit the family or its grid
        """
        self.entries[(site_id, family, task)] = TunedEntry(validate_params(family, task, params, grid), float(score))

    def get(self, site_id: str, family: str, task: str) -> Dict[str, Any]:
        """
        Raises:
            ConfigError: If no parameters were tuned for the key
        """
        try:
            return dict(self.entries[(site_id, family, task)].params)
        except KeyError:
            raise ConfigError(f"no tuned parameters for site '{site_id}', {family}/{task}") from None

    def require(self, site_id: str, families: Sequence[str], tasks: Sequence[str] = TASKS) -> None:
        absent = [f"{f}/{t}" for f in families for t in tasks if (site_id, f, t) not in self.entries]
        if absent:
            raise ConfigError(f"site '{site_id}' lacks tuned parameters for {', '.join(absent)}")

    def merge(self, other: "TunedStore") -> None:
        if other.grid_version != self.grid_version:
            logger.warning(f"Merging stores of grid versions {other.grid_version} and {self.grid_version}")
        self.entries.update(other.entries)

    def to_dict(self) -> Dict[str, Any]:
        sites: Dict[str, Any] = {}
        for (site_id, family, task), entry in sorted(self.entries.items()):
            sites.setdefault(site_id, {}).setdefault(family, {})[task] = {
                "params": entry.params,
                "score": entry.score,
            }
        return {
            "format": STORE_FORMAT,
            "split_seed": self.split_seed,
            "grid_version": self.grid_version,
            "sites": sites,
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "TunedStore":
        if document.get("format") != STORE_FORMAT:
            raise ConfigError(f"unsupported tuned store format {document.get('format')}")
        store = cls(split_seed=int(document["split_seed"]), grid_version=str(document["grid_version"]))
        for site_id, families in document.get("sites", {}).items():
            for family, tasks in families.items():
                for task, entry in tasks.items():
                    store.put(site_id, family, task, entry["params"], entry["score"])
        return store

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
        logger.info(f"Saved {len(self.entries)} tuned entries to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TunedStore":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"tuned store not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as handle:
                return cls.from_dict(json.load(handle))
        except json.JSONDecodeError as e:
            raise ConfigError(f"tuned store {path} is not valid JSON: {e}") from e


def tune_site(
    table: SeriesTable,
    store: TunedStore,
    grids: Mapping[str, Mapping[str, Mapping[str, list]]],
    families: Sequence[str] = FAMILY_ORDER,
    tasks: Sequence[str] = (TASK_CLASSIFY, TASK_REGRESS),
    options: Optional[Mapping[str, Mapping[str, Any]]] = None,
    n_jobs: int = 1,
) -> TunedStore:
    """Grid-search every (family, task) for one table and record the winners in the store."""
    for family in families:
        for task in tasks:
            params, score = grid_search(
                table,
                family,
                task,
                store.split_seed,
                grids[family][task],
                (options or {}).get(family),
                n_jobs,
            )
            store.put(table.site_id, family, task, params, score, grids[family][task])
    return store
