"""
CART decision trees grown by exhaustive threshold search.

One split search serves three uses:

* regression trees (squared error), node statistic ``S = y``
* binary classification trees (Gini), node statistic ``S = [y, 1 - y]``
* boosting trees on gradients, node statistic ``S = -g`` with weights ``W = h``

For a node the score is ``sum_k S_k**2 / (W + reg_lambda)`` and the gain of a split is
``score(left) + score(right) - score(node)``. For squared error this is the reduction in
the sum of squared errors, for Gini the reduction in ``n * gini``, and for gradients the
second-order boosting gain.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def _score(S: np.ndarray, W: np.ndarray, reg_lambda: float) -> np.ndarray:
    return np.sum(S**2, axis=-1) / (W + reg_lambda)


def best_split(
    X: np.ndarray,
    S: np.ndarray,
    W: np.ndarray,
    features: Optional[np.ndarray] = None,
    min_samples_leaf: int = 1,
    min_child_weight: float = 0.0,
    reg_lambda: float = 0.0,
) -> Optional[Split]:
    """
    Find the split with the largest gain over the candidate features.

    Thresholds are midpoints between consecutive distinct values; rows with
    ``x <= threshold`` go left. Ties keep the lowest feature index, then the
    lowest threshold.

    Args:
        X: Node rows, shape (n, p)
        S: Per-row statistics, shape (n, k)
        W: Per-row weights, shape (n,)
        features: Candidate feature indices (all when None)
        min_samples_leaf: Minimum rows on each side
        min_child_weight: Minimum weight sum on each side
        reg_lambda: L2 penalty on leaf values

    Returns:
        Best split, or None if no valid split has positive gain
    """
    n = X.shape[0]
    if n < 2:
        return None
    if features is None:
        features = np.arange(X.shape[1])
    parent = float(_score(S.sum(axis=0), W.sum(), reg_lambda))
    tolerance = GAIN_TOLERANCE * max(1.0, abs(parent))

    best: Optional[Split] = None
    positions = np.arange(1, n)
    for feature in np.sort(features):
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        cum_S = np.cumsum(S[order], axis=0)
        cum_W = np.cumsum(W[order])
        left_S = cum_S[:-1]
        left_W = cum_W[:-1]
        right_S = cum_S[-1] - left_S
        right_W = cum_W[-1] - left_W

        valid = xs[:-1] < xs[1:]
        valid &= (positions >= min_samples_leaf) & (n - positions >= min_samples_leaf)
        if min_child_weight > 0:
            valid &= (left_W >= min_child_weight) & (right_W >= min_child_weight)
        if not valid.any():
            continue
        gains = _score(left_S, left_W, reg_lambda) + _score(right_S, right_W, reg_lambda) - parent
        gains = np.where(valid, gains, -np.inf)
        at = int(np.argmax(gains))
        gain = float(gains[at])
        if gain > tolerance and (best is None or gain > best.gain):
            threshold = 0.5 * (xs[at] + xs[at + 1])
            if threshold >= xs[at + 1]:
                threshold = xs[at]
            best = Split(int(feature), float(threshold), gain)
    return best


@dataclass(frozen=True)
class TreeArrays:
    """Flat node arrays; leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        nodes = np.zeros(X.shape[0], dtype=int)
        active = np.flatnonzero(self.feature[nodes] >= 0)
        while active.size:
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[nodes[active]] >= 0]
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def grow_tree(
    X: np.ndarray,
    S: np.ndarray,
    W: np.ndarray,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    min_child_weight: float = 0.0,
    reg_lambda: float = 0.0,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TreeArrays:
    """
    Grow a tree depth-first; a leaf's value is ``S[:, 0].sum() / (W.sum() + reg_lambda)``.

    Args:
        max_features: Features sampled per node (all when None); needs ``rng``
    """
    S = S.reshape(len(S), -1)
    n_features = X.shape[1]
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(rows: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(S[rows, 0].sum() / (W[rows].sum() + reg_lambda)))
        return len(feature) - 1

    root_rows = np.arange(X.shape[0])
    stack: List[Tuple[int, np.ndarray, int]] = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if len(rows) < max(2, min_samples_split) or (max_depth is not None and depth >= max_depth):
            continue
        if max_features is not None and max_features < n_features:
            candidates = rng.choice(n_features, size=max_features, replace=False)
        else:
            candidates = None
        split = best_split(
            X[rows], S[rows], W[rows], candidates, min_samples_leaf, min_child_weight, reg_lambda
        )
        if split is None:
            continue
        goes_left = X[rows, split.feature] <= split.threshold
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return TreeArrays(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        value=np.asarray(value, dtype=float),
    )


def regression_tree(X: np.ndarray, y: np.ndarray, **kwargs) -> TreeArrays:
    return grow_tree(X, np.asarray(y, dtype=float).reshape(-1, 1), np.ones(len(y)), **kwargs)


def classification_tree(X: np.ndarray, y: np.ndarray, **kwargs) -> TreeArrays:
    """Gini tree for labels in {0, 1}; leaf values are the class-1 fraction."""
    y = np.asarray(y, dtype=float)
    return grow_tree(X, np.column_stack([y, 1.0 - y]), np.ones(len(y)), **kwargs)
