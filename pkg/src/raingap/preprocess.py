"""
Leak-free per-fold preparation.

Fold planning, cyclic time features, complete-case extraction, min-max scaling and
binary target conversion. Everything that is fitted here is fitted on training rows only.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .const import CYCLIC_COLUMNS, DEFAULT_CORE_FEATURES, ORIGIN_CYCLIC, TUNING_TRAIN_FRACTION
from .dataset import SeriesTable, select_feature_set
from .exceptions import DataError, DomainError, ScalerFitError, TrainingDataError

logger = logging.getLogger(__name__)


def encode_cyclic(x: int, max_x: int) -> Tuple[float, float]:
    """
    Map a periodic integer onto the unit circle.

    Args:
        x: Value in 1..max_x (hour of day 1..24, month 1..12)
        max_x: Period length

    Returns:
        (sin(2*pi*x/max_x), cos(2*pi*x/max_x))
    """
    if max_x < 1 or not 1 <= x <= max_x:
        raise DomainError(f"cyclic value {x} outside 1..{max_x}")
    angle = 2.0 * math.pi * x / max_x
    return math.sin(angle), math.cos(angle)


def cyclic_features(timestamps: pd.DatetimeIndex) -> np.ndarray:
    """
    Hour-of-day and month encodings for each timestamp.

    Both half-hours of an hour share one encoding; hour 0 maps to 24.

    Returns:
        Array of shape (n, 4) ordered as hour_sin, hour_cos, month_sin, month_cos
    """
    hours = np.asarray(timestamps.hour)
    hours = np.where(hours == 0, 24, hours)
    months = np.asarray(timestamps.month)
    hour_angle = 2.0 * np.pi * hours / 24.0
    month_angle = 2.0 * np.pi * months / 12.0
    return np.column_stack([np.sin(hour_angle), np.cos(hour_angle), np.sin(month_angle), np.cos(month_angle)])


def add_cyclic_features(table: SeriesTable) -> SeriesTable:
    """Append the four cyclic columns to a table (no-op if already present)."""
    if all(name in table.feature_names for name in CYCLIC_COLUMNS):
        return table
    return table.with_columns(CYCLIC_COLUMNS, cyclic_features(table.timestamps), ORIGIN_CYCLIC)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature (min, max) learned from training rows."""

    data_min: np.ndarray
    data_max: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        """
        Scale rows affinely per feature.

        Values outside the training range map outside [0, 1] and are not clipped;
        constant training columns map to 0. Missing cells stay missing.
        """
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.data_min.shape[0]:
            raise DataError(f"scaler fitted on {self.data_min.shape[0]} features, got {X.shape[1]}")
        scale = self.data_max - self.data_min
        constant = scale == 0
        safe = np.where(constant, 1.0, scale)
        out = (X - self.data_min) / safe
        out[:, constant] = np.where(np.isnan(X[:, constant]), np.nan, 0.0)
        return out

    def state(self) -> Dict[str, Any]:
        return {"data_min": self.data_min, "data_max": self.data_max}


def fit_scaler(train_rows: np.ndarray) -> MinMaxScaler:
    """
    Learn per-feature minimum and maximum from training rows.

    Raises:
        ScalerFitError: If a feature has no present training value
    """
    X = np.asarray(train_rows, dtype=float)
    empty = np.all(np.isnan(X), axis=0) if X.shape[0] else np.ones(X.shape[1], dtype=bool)
    if empty.any():
        raise ScalerFitError(f"features {np.flatnonzero(empty).tolist()} have no present training value")
    data_min = np.nanmin(X, axis=0)
    data_max = np.nanmax(X, axis=0)
    data_min.setflags(write=False)
    data_max.setflags(write=False)
    return MinMaxScaler(data_min, data_max)


def apply_scaler(scaler: MinMaxScaler, rows: np.ndarray) -> np.ndarray:
    return scaler.transform(rows)


def complete_case(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Indices of rows with no missing feature cell and a present target.

    Raises:
        TrainingDataError: If no row survives
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    complete = ~np.isnan(y)
    if X.shape[1]:
        complete &= ~np.isnan(X).any(axis=1)
    kept = np.flatnonzero(complete)
    if kept.size == 0:
        raise TrainingDataError("no complete rows remain after complete-case sampling")
    return kept


def to_binary(target: np.ndarray) -> np.ndarray:
    """Class 1 where precipitation > 0, class 0 where it is exactly 0."""
    target = np.asarray(target, dtype=float)
    if np.isnan(target).any():
        raise DataError("binary conversion is defined only for present targets")
    return (target > 0).astype(int)


@dataclass(frozen=True)
class FoldPlan:
    """Random assignment of rows to folds."""

    n_folds: int
    seed: int
    assignment: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.assignment)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def digest(self) -> str:
        payload = f"{self.n_folds}:{self.seed}:".encode() + np.asarray(self.assignment, dtype=np.int64).tobytes()
        return hashlib.sha256(payload).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_folds": self.n_folds,
            "seed": self.seed,
            "assignment": [int(a) for a in self.assignment],
            "digest": self.digest(),
        }

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "FoldPlan":
        assignment = np.asarray(document["assignment"], dtype=int)
        assignment.setflags(write=False)
        plan = cls(int(document["n_folds"]), int(document["seed"]), assignment)
        if "digest" in document and document["digest"] != plan.digest():
            raise DataError("fold plan digest does not match its assignment")
        return plan

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FoldPlan":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def make_folds(n_rows: int, n_folds: int, seed: int) -> FoldPlan:
    """
    Assign rows to folds uniformly at random; fold sizes differ by at most one.

    Raises:
        DataError: If there are fewer rows than folds
    """
    if n_folds < 2:
        raise DataError(f"need at least 2 folds, got {n_folds}")
    if n_rows < n_folds:
        raise DataError(f"cannot split {n_rows} rows into {n_folds} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n_rows, dtype=int)
    assignment[rng.permutation(n_rows)] = np.arange(n_rows) % n_folds
    assignment.setflags(write=False)
    return FoldPlan(n_folds=n_folds, seed=seed, assignment=assignment)


def split_train_test(n_rows: int, seed: int, train_fraction: float = TUNING_TRAIN_FRACTION) -> Tuple[np.ndarray, np.ndarray]:
    """Single random split; the training part has round(train_fraction * n) rows."""
    n_train = int(round(train_fraction * n_rows))
    if n_train < 1 or n_train >= n_rows:
        raise DataError(f"cannot split {n_rows} rows {train_fraction:.0%}/{1 - train_fraction:.0%}")
    order = np.random.default_rng(seed).permutation(n_rows)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def prepare_table(
    table: SeriesTable,
    feature_set: str,
    cyclic: bool,
    core_features: Sequence[str] = DEFAULT_CORE_FEATURES,
) -> SeriesTable:
    """
    Apply a feature-set variant and the cyclic toggle, then drop rows without a target.

    Raises:
        DataError: If no row has a present target
    """
    if cyclic:
        table = add_cyclic_features(table)
    table = select_feature_set(table, feature_set, core_features)
    if not cyclic:
        table = table.select_columns([n for n, o in zip(table.feature_names, table.origins) if o != ORIGIN_CYCLIC])
    present = table.present_target
    if not present.any():
        raise DataError(f"table {table.site_id}: no present precipitation values")
    if not present.all():
        logger.debug(f"Table {table.site_id}: discarded {int((~present).sum())} rows without precipitation")
    return table.select_rows(present)
