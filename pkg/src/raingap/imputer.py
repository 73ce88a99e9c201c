"""
Iterative random-forest completion of feature rows.

One regression forest per feature column is fitted on the training rows, with that
column as the output and every other column as input. Test rows are first filled
with the training means, then swept column by column (least-missing column first)
until the filled cells stop changing or the round cap is hit.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .const import DEFAULT_IMPUTER
from .dataset import SeriesTable
from .exceptions import ImputerError, SchemaMismatchError
from .learners.forest import ForestModel, fit_forest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImputerModel:
    feature_names: Tuple[str, ...]
    order: Tuple[str, ...]
    means: np.ndarray
    forests: Dict[str, ForestModel]
    max_rounds: int
    tol: float

    def inputs_of(self, name: str) -> np.ndarray:
        j = self.feature_names.index(name)
        return np.array([i for i in range(len(self.feature_names)) if i != j], dtype=int)


def visit_order(missing_counts: Sequence[int], feature_names: Sequence[str]) -> Tuple[str, ...]:
    """Columns sorted by (training missing count, name)."""
    return tuple(name for _, name in sorted(zip([int(c) for c in missing_counts], feature_names)))


def fit_imputer(
    train: Union[SeriesTable, np.ndarray],
    feature_names: Optional[Sequence[str]] = None,
    max_rounds: int = DEFAULT_IMPUTER["max_rounds"],
    n_estimators: int = DEFAULT_IMPUTER["n_estimators"],
    tol: float = DEFAULT_IMPUTER["tol"],
    max_samples: Optional[int] = DEFAULT_IMPUTER["max_samples"],
    seed: int = 0,
    n_jobs: int = 1,
    missing_counts: Optional[Sequence[int]] = None,
) -> ImputerModel:
    """
    Fit one forest per feature column on training rows only.

    Training cells that are missing are filled with the column mean when used as inputs;
    each forest is fitted on the rows where its own column is present.

    Args:
        train: Training table or row matrix
        feature_names: Column names when ``train`` is a matrix
        max_rounds: Sweep cap for impute_rows
        n_estimators: Trees per forest (unlimited depth, min leaf 1)
        tol: Stop when the mean squared change of the filled cells falls below it
        max_samples: Bootstrap size cap per tree
        seed: Random seed
        n_jobs: Worker threads
        missing_counts: Per-column missing counts deciding the visit order, when the
            forests are fitted on a complete subset of a larger training set

    Returns:
        ImputerModel

    Raises:
        ImputerError: With fewer than 2 feature columns or a column with no training value
    """
    if isinstance(train, SeriesTable):
        feature_names = train.feature_names
        X = np.array(train.features, dtype=float)
    else:
        X = np.array(train, dtype=float)
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    names = tuple(feature_names)
    if X.ndim != 2 or X.shape[1] != len(names):
        raise ImputerError(f"training matrix shape {X.shape} does not match {len(names)} column names")
    if len(names) < 2:
        raise ImputerError(f"imputation needs at least 2 feature columns, got {len(names)}")
    empty = [n for n, col in zip(names, X.T) if np.isnan(col).all()]
    if empty:
        raise ImputerError(f"columns without any training value: {', '.join(empty)}")

    means = np.nanmean(X, axis=0)
    filled = np.where(np.isnan(X), means, X)
    if missing_counts is None:
        missing_counts = np.isnan(X).sum(axis=0)
    if len(missing_counts) != len(names):
        raise ImputerError(f"{len(missing_counts)} missing counts for {len(names)} columns")
    order = visit_order(missing_counts, names)
    forests: Dict[str, ForestModel] = {}
    for j, name in enumerate(names):
        observed = ~np.isnan(X[:, j])
        inputs = np.delete(filled[observed], j, axis=1)
        forests[name] = fit_forest(
            inputs,
            X[observed, j],
            "regress",
            n_estimators=int(n_estimators),
            max_depth=None,
            min_samples_split=2,
            min_samples_leaf=1,
            seed=int(np.random.SeedSequence([seed, j]).generate_state(1)[0]),
            n_jobs=n_jobs,
            max_samples=max_samples,
        )
    means.setflags(write=False)
    logger.debug(f"Fitted imputer on {X.shape[0]} rows; visit order {', '.join(order)}")
    return ImputerModel(names, order, means, forests, int(max_rounds), float(tol))


def impute_rows(
    model: ImputerModel,
    rows: np.ndarray,
    feature_names: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """
    Fill the missing cells of rows; present cells are returned unchanged.

    Args:
        model: Fitted imputer
        rows: Row matrix with NaN for missing cells (not modified)
        feature_names: Column names of ``rows``, checked against the model when given

    Returns:
        Completed copy of the rows

    Raises:
        SchemaMismatchError: If the columns differ from the fitted ones
    """
    work = np.array(rows, dtype=float)
    if work.ndim != 2 or work.shape[1] != len(model.feature_names):
        raise SchemaMismatchError(
            f"imputer fitted on {len(model.feature_names)} columns, got shape {work.shape}"
        )
    if feature_names is not None and tuple(feature_names) != model.feature_names:
        raise SchemaMismatchError(f"column names {list(feature_names)} differ from {list(model.feature_names)}")

    missing = np.isnan(work)
    if not missing.any():
        return work
    work[missing] = np.broadcast_to(model.means, work.shape)[missing]

    for round_no in range(1, model.max_rounds + 1):
        previous = work[missing]
        for name in model.order:
            j = model.feature_names.index(name)
            target_rows = missing[:, j]
            if target_rows.any():
                inputs = work[target_rows][:, model.inputs_of(name)]
                work[target_rows, j] = model.forests[name].predict(inputs)
        change = float(np.mean((work[missing] - previous) ** 2))
        logger.debug(f"Imputer round {round_no}: mean squared change {change:.3g}")
        if change < model.tol:
            break
    return work
