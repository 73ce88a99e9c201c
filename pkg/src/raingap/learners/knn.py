"""k-nearest-neighbour learners with brute-force and kd-tree neighbour search."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..const import TASK_CLASSIFY
from ..exceptions import ConfigError

logger = logging.getLogger(__name__)

ALGORITHMS = ("auto", "kd-tree", "brute")
WEIGHTS = ("uniform", "distance")
KD_TREE_MAX_FEATURES = 15
BRUTE_CHUNK = 256


def resolve_algorithm(algorithm: str, n_features: int) -> str:
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown knn algorithm '{algorithm}'")
    if algorithm == "auto":
        return "kd-tree" if n_features <= KD_TREE_MAX_FEATURES else "brute"
    return algorithm


@dataclass(frozen=True)
class KNNModel:
    task: str
    X: np.ndarray
    y: np.ndarray
    n_neighbours: int
    algorithm: str
    leaf_size: int
    weights: str
    index: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def neighbours(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the k nearest training rows, nearest first."""
        k = self.n_neighbours
        if self.index is not None:
            dist, idx = self.index.query(queries, k=k)
            return dist.reshape(len(queries), k), idx.reshape(len(queries), k)
        dist = np.empty((len(queries), k))
        idx = np.empty((len(queries), k), dtype=int)
        for start in range(0, len(queries), BRUTE_CHUNK):
            block = cdist(queries[start : start + BRUTE_CHUNK], self.X)
            order = np.argsort(block, axis=1, kind="stable")[:, :k]
            idx[start : start + BRUTE_CHUNK] = order
            dist[start : start + BRUTE_CHUNK] = np.take_along_axis(block, order, axis=1)
        return dist, idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        dist, idx = self.neighbours(np.asarray(X, dtype=float))
        values = self.y[idx]
        if self.weights == "distance":
            exact = dist == 0
            with np.errstate(divide="ignore"):
                w = np.where(exact.any(axis=1, keepdims=True), exact.astype(float), 1.0 / dist)
        else:
            w = np.ones_like(dist)
        average = np.sum(w * values, axis=1) / np.sum(w, axis=1)
        if self.task == TASK_CLASSIFY:
            return (average > 0.5).astype(int)
        return average


def fit_knn(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    n_neighbours: int = 5,
    leaf_size: int = 1,
    algorithm: str = "auto",
    weights: str = "uniform",
) -> KNNModel:
    """
    Store the training set and build the neighbour index.

    leaf_size only affects the kd-tree's speed. A neighbour count above the training
    size is reduced to it.
    """
    if weights not in WEIGHTS:
        raise ConfigError(f"unknown knn weighting '{weights}'")
    X = np.array(X, dtype=float)
    y = np.array(y, dtype=float)
    k = int(n_neighbours)
    if k > X.shape[0]:
        logger.warning(f"knn: n_neighbours={k} exceeds {X.shape[0]} training rows, using {X.shape[0]}")
        k = X.shape[0]
    resolved = resolve_algorithm(algorithm, X.shape[1])
    index = cKDTree(X, leafsize=max(1, int(leaf_size))) if resolved == "kd-tree" else None
    X.setflags(write=False)
    y.setflags(write=False)
    return KNNModel(task, X, y, k, resolved, int(leaf_size), weights, index)
