"""Random forests of bootstrapped CART trees."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..const import TASK_CLASSIFY
from .tree import TreeArrays, classification_tree, regression_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestModel:
    task: str
    trees: Tuple[TreeArrays, ...]
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote (class 0 wins ties) or mean of the tree outputs."""
        outputs = np.stack([tree.predict(X) for tree in self.trees])
        if self.task == TASK_CLASSIFY:
            votes = (outputs > 0.5).sum(axis=0)
            return (2 * votes > len(self.trees)).astype(int)
        return outputs.mean(axis=0)


def _fit_one(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    seed_sequence: np.random.SeedSequence,
    bootstrap: bool,
    max_features: Optional[int],
    n_samples: int,
    **tree_params,
) -> TreeArrays:
    rng = np.random.default_rng(seed_sequence)
    n = X.shape[0]
    rows = rng.integers(0, n, size=n_samples) if bootstrap else np.arange(n)
    grow = classification_tree if task == TASK_CLASSIFY else regression_tree
    return grow(X[rows], y[rows], max_features=max_features, rng=rng, **tree_params)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    n_estimators: int = 100,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    seed: int = 0,
    n_jobs: int = 1,
    bootstrap: bool = True,
    max_samples: Optional[int] = None,
) -> ForestModel:
    """
    Fit a forest; each tree sees a bootstrap sample of size n.

    Classification trees sample sqrt(p) features per node, regression trees use all of
    them. Tree seeds are spawned from ``seed``, so the result does not depend on ``n_jobs``.

    Args:
        X: Training rows
        y: Labels in {0, 1} or amplitudes
        task: 'classify' or 'regress'
        n_estimators: Number of trees
        max_depth: Depth limit (None for unlimited)
        min_samples_split: Minimum rows to split a node
        min_samples_leaf: Minimum rows per leaf
        seed: Random seed
        n_jobs: Worker threads
        max_samples: Bootstrap size cap per tree (None for the training size)

    Returns:
        Fitted ForestModel
    """
    n_features = X.shape[1]
    max_features = max(1, int(math.sqrt(n_features))) if task == TASK_CLASSIFY else None
    n_samples = X.shape[0] if max_samples is None else min(X.shape[0], int(max_samples))
    seeds = np.random.SeedSequence(seed).spawn(n_estimators)
    trees = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_fit_one)(
            X,
            y,
            task,
            seeds[i],
            bootstrap,
            max_features,
            n_samples,
            max_depth=max_depth,
            min_samples_split=min_samples_split,
            min_samples_leaf=min_samples_leaf,
        )
        for i in range(n_estimators)
    )
    logger.debug(f"Fitted {task} forest: {n_estimators} trees on {X.shape[0]} rows")
    return ForestModel(task=task, trees=tuple(trees), n_features=n_features)
