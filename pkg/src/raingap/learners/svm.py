"""
Support vector machines trained by sequential minimal optimization.

One solver handles both tasks. It minimizes ``0.5 a'Qa + p'a`` subject to
``y'a = 0`` and ``0 <= a <= C``, choosing the working pair by maximal violation
and second-order gain. Classification uses the hinge-loss dual directly;
epsilon-insensitive regression uses the doubled 2n-variable form.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..const import TASK_CLASSIFY
from ..exceptions import ConfigError, DegenerateModelError

logger = logging.getLogger(__name__)

KERNELS = ("linear", "rbf")
TAU = 1e-12
CACHE_ROWS = 2048


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelRows:
    """Kernel rows of the training set, computed on demand and cached."""

    def __init__(self, X: np.ndarray, kernel: str, gamma: float, cache_rows: int = CACHE_ROWS):
        self.X = X
        self.kernel = kernel
        self.gamma = gamma
        self.cache_rows = cache_rows
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()
        if kernel == "linear":
            self.diagonal = np.sum(X**2, axis=1)
        else:
            self.diagonal = np.ones(X.shape[0])

    def row(self, i: int) -> np.ndarray:
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        values = kernel_matrix(self.X[i : i + 1], self.X, self.kernel, self.gamma)[0]
        self._cache[i] = values
        if len(self._cache) > self.cache_rows:
            self._cache.popitem(last=False)
        return values


@dataclass(frozen=True)
class SolverResult:
    alpha: np.ndarray
    gradient: np.ndarray
    rho: float
    iterations: int
    converged: bool


def solve_smo(
    q_row: Callable[[int], np.ndarray],
    q_diag: np.ndarray,
    p: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
) -> SolverResult:
    """
    Solve the box- and equality-constrained dual.

    Args:
        q_row: Row i of Q, where ``Q_ij = y_i y_j K_ij``
        q_diag: Diagonal of Q
        p: Linear term
        y: Signs in {-1, +1}
        C: Upper bound of every multiplier
        tol: Stop when the maximal KKT violation falls below it
        max_iter: Iteration cap

    Returns:
        SolverResult with multipliers clipped exactly to [0, C]
    """
    n = len(p)
    alpha = np.zeros(n)
    G = np.array(p, dtype=float)
    positive = y > 0
    iterations = 0
    converged = False

    while iterations < max_iter:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        # -y*G over the sets that may move up / down
        up = np.where(positive, ~at_upper, ~at_lower)
        low = np.where(positive, ~at_lower, ~at_upper)
        minus_yG = -y * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, minus_yG, -np.inf)))
        g_max = minus_yG[i]
        g_min = float(np.min(np.where(low, minus_yG, np.inf)))
        if g_max - g_min < tol:
            converged = True
            break

        Q_i = q_row(i)
        grad_diff = g_max - minus_yG
        candidates = low & (grad_diff > 0)
        if not candidates.any():
            converged = True
            break
        quad = q_diag[i] + q_diag - 2.0 * y[i] * y * Q_i
        quad = np.where(quad > 0, quad, TAU)
        objective = np.where(candidates, -(grad_diff**2) / quad, np.inf)
        j = int(np.argmin(objective))
        Q_j = q_row(j)

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad_coef = q_diag[i] + q_diag[j] + 2.0 * Q_i[j]
            quad_coef = quad_coef if quad_coef > 0 else TAU
            delta = (-G[i] - G[j]) / quad_coef
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad_coef = q_diag[i] + q_diag[j] - 2.0 * Q_i[j]
            quad_coef = quad_coef if quad_coef > 0 else TAU
            delta = (G[i] - G[j]) / quad_coef
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        G += Q_i * (alpha[i] - old_i) + Q_j * (alpha[j] - old_j)
        iterations += 1

    if not converged:
        logger.warning(f"SMO stopped at the iteration cap ({max_iter}) before reaching tol={tol}")
    return SolverResult(alpha, G, _rho(alpha, G, y, C), iterations, converged)


def _rho(alpha: np.ndarray, G: np.ndarray, y: np.ndarray, C: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    upper_bound = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lower_bound = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = float(yG[upper_bound].min()) if upper_bound.any() else np.inf
    lb = float(yG[lower_bound].max()) if lower_bound.any() else -np.inf
    if not np.isfinite(ub) or not np.isfinite(lb):
        return float(ub if np.isfinite(ub) else lb)
    return 0.5 * (ub + lb)


@dataclass(frozen=True)
class SVMModel:
    task: str
    kernel: str
    gamma: float
    support_vectors: np.ndarray
    coef: np.ndarray
    rho: float
    n_features: int
    n_train: int
    subsampled_from: Optional[int]
    converged: bool

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], -self.rho)
        return kernel_matrix(np.asarray(X, dtype=float), self.support_vectors, self.kernel, self.gamma) @ self.coef - self.rho

    def predict(self, X: np.ndarray) -> np.ndarray:
        decision = self.decision_function(X)
        if self.task == TASK_CLASSIFY:
            return (decision > 0).astype(int)
        return decision


def _subsample(X: np.ndarray, y: np.ndarray, max_rows: int, seed: int) -> Tuple[np.ndarray, np.ndarray, Optional[int]]:
    if X.shape[0] <= max_rows:
        return X, y, None
    rows = np.sort(np.random.default_rng(seed).choice(X.shape[0], size=max_rows, replace=False))
    logger.info(f"svm: training set capped at {max_rows} of {X.shape[0]} rows")
    return X[rows], y[rows], X.shape[0]


def fit_svm(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    C: float = 10.0,
    gamma: float = 0.1,
    kernel: str = "rbf",
    epsilon: float = 0.1,
    tol: float = 1e-3,
    max_train_rows: int = 20000,
    max_iter: int = 1_000_000,
    seed: int = 0,
) -> Tuple[SVMModel, SolverResult]:
    """
    Fit a C-SVC (hinge loss) or an epsilon-SVR.

    Returns:
        (model, solver result); the solver result exposes the raw multipliers
    """
    if kernel not in KERNELS:
        raise ConfigError(f"unknown svm kernel '{kernel}'")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    X, y, original = _subsample(X, y, int(max_train_rows), seed)
    n = X.shape[0]
    rows = KernelRows(X, kernel, gamma)

    if task == TASK_CLASSIFY:
        signs = np.where(y > 0, 1.0, -1.0)
        if np.unique(signs).size < 2:
            raise DegenerateModelError("svm classification needs both classes in the training set")
        result = solve_smo(
            lambda i: signs[i] * signs * rows.row(i),
            rows.diagonal,
            -np.ones(n),
            signs,
            float(C),
            tol,
            int(max_iter),
        )
        coef = result.alpha * signs
    else:
        signs = np.concatenate([np.ones(n), -np.ones(n)])
        linear = np.concatenate([epsilon - y, epsilon + y])

        def q_row(i: int) -> np.ndarray:
            k = rows.row(i % n)
            return signs[i] * signs * np.concatenate([k, k])

        result = solve_smo(q_row, np.concatenate([rows.diagonal, rows.diagonal]), linear, signs, float(C), tol, int(max_iter))
        coef = result.alpha[:n] - result.alpha[n:]

    support = np.flatnonzero(coef != 0)
    logger.debug(f"svm {task}: {support.size} support vectors after {result.iterations} iterations")
    model = SVMModel(
        task=task,
        kernel=kernel,
        gamma=float(gamma),
        support_vectors=X[support],
        coef=coef[support],
        rho=result.rho,
        n_features=X.shape[1],
        n_train=n,
        subsampled_from=original,
        converged=result.converged,
    )
    return model, result
