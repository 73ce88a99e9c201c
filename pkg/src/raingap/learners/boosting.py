"""
Gradient tree boosting with second-order leaf values.

Each round fits a tree to the gradients and hessians of the current margin. The
stagewise step starts at the learning rate and is halved until the training loss
does not increase.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from ..const import TASK_CLASSIFY
from .tree import TreeArrays, grow_tree

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
HESSIAN_FLOOR = 1e-16


def _loss(task: str, y: np.ndarray, margin: np.ndarray) -> float:
    if task == TASK_CLASSIFY:
        # mean of log(1 + exp(m)) - y * m
        return float(np.mean(np.logaddexp(0.0, margin) - y * margin))
    return float(0.5 * np.mean((margin - y) ** 2))


def _gradients(task: str, y: np.ndarray, margin: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if task == TASK_CLASSIFY:
        p = expit(margin)
        return p - y, np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
    return margin - y, np.ones_like(y)


@dataclass(frozen=True)
class BoostedModel:
    task: str
    base_margin: float
    trees: Tuple[TreeArrays, ...]
    steps: Tuple[float, ...]
    train_loss: Tuple[float, ...]
    n_features: int

    def margin(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_margin)
        for tree, step in zip(self.trees, self.steps):
            out += step * tree.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        margin = self.margin(X)
        if self.task == TASK_CLASSIFY:
            return (margin > 0).astype(int)
        return margin


def fit_boosting(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    max_depth: Optional[int] = 8,
    min_child_weight: float = 1.0,
    subsample: float = 1.0,
    learning_rate: float = 0.1,
    n_rounds: int = 100,
    reg_lambda: float = 0.0,
    seed: int = 0,
) -> BoostedModel:
    """
    Fit boosted trees on logistic (classify) or squared (regress) loss.

    Args:
        X: Training rows
        y: Labels in {0, 1} or amplitudes
        task: 'classify' or 'regress'
        max_depth: Tree depth limit
        min_child_weight: Minimum hessian sum per child
        subsample: Fraction of rows drawn without replacement per round
        learning_rate: Initial stagewise step
        n_rounds: Number of rounds
        reg_lambda: L2 penalty on leaf values
        seed: Random seed for row subsampling

    Returns:
        Fitted BoostedModel; ``train_loss`` holds the loss before round 1 and after each round
    """
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    if task == TASK_CLASSIFY:
        p = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        base = float(np.log(p / (1.0 - p)))
    else:
        base = float(y.mean())

    margin = np.full(n, base)
    loss = _loss(task, y, margin)
    history = [loss]
    trees = []
    steps = []
    n_sub = max(1, int(round(subsample * n)))

    for round_no in range(n_rounds):
        rows = np.sort(rng.choice(n, size=n_sub, replace=False)) if n_sub < n else np.arange(n)
        g, h = _gradients(task, y[rows], margin[rows])
        tree = grow_tree(
            X[rows],
            -g.reshape(-1, 1),
            h,
            max_depth=max_depth,
            min_child_weight=min_child_weight,
            reg_lambda=reg_lambda,
        )
        update = tree.predict(X)
        step = learning_rate
        for _ in range(MAX_HALVINGS):
            candidate = _loss(task, y, margin + step * update)
            if candidate <= loss:
                break
            step *= 0.5
        else:
            logger.debug(f"Boosting round {round_no}: no improving step, tree skipped")
            history.append(loss)
            continue
        margin = margin + step * update
        loss = candidate
        history.append(loss)
        trees.append(tree)
        steps.append(step)

    logger.debug(f"Fitted {task} boosting: {len(trees)} trees, final loss {loss:.6g}")
    return BoostedModel(
        task=task,
        base_margin=base,
        trees=tuple(trees),
        steps=tuple(steps),
        train_loss=tuple(history),
        n_features=X.shape[1],
    )
