"""
Fully connected rectifier networks trained with Adam.

Classification networks end in a sigmoid unit trained on binary cross-entropy,
regression networks in a linear unit trained on mean squared error.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import expit

from ..const import TASK_CLASSIFY

logger = logging.getLogger(__name__)

Params = List[Tuple[np.ndarray, np.ndarray]]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def init_params(n_inputs: int, hidden_layers: int, width: int, rng: np.random.Generator) -> Params:
    """He-normal weights and zero biases for ``hidden_layers`` hidden layers plus one output unit."""
    sizes = [n_inputs] + [width] * hidden_layers + [1]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / max(1, fan_in)), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params: Params, X: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Output pre-activations and the inputs of every layer."""
    activations = [X]
    out = X
    for W, b in params[:-1]:
        out = np.maximum(out @ W + b, 0.0)
        activations.append(out)
    W, b = params[-1]
    return (out @ W + b).ravel(), activations


def loss_and_gradients(params: Params, X: np.ndarray, y: np.ndarray, task: str) -> Tuple[float, Params]:
    """
    Mean loss over the rows and its analytic gradient.

    Args:
        params: Layer (weights, bias) pairs
        X: Input rows
        y: Labels in {0, 1} or amplitudes
        task: 'classify' or 'regress'

    Returns:
        (loss, gradients shaped like params)
    """
    n = X.shape[0]
    z, activations = forward(params, X)
    if task == TASK_CLASSIFY:
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        delta = ((expit(z) - y) / n).reshape(-1, 1)
    else:
        loss = float(np.mean((z - y) ** 2))
        delta = (2.0 * (z - y) / n).reshape(-1, 1)

    grads: Params = []
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        inputs = activations[layer]
        grads.append((inputs.T @ delta, delta.sum(axis=0)))
        if layer > 0:
            delta = (delta @ W.T) * (inputs > 0)
    grads.reverse()
    return loss, grads


@dataclass(frozen=True)
class NetworkModel:
    task: str
    params: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    hidden_layers: int
    loss_history: Tuple[float, ...]
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        z, _ = forward(list(self.params), np.asarray(X, dtype=float))
        if self.task == TASK_CLASSIFY:
            return (expit(z) > 0.5).astype(int)
        return z


def fit_network(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    hidden_layers: int = 2,
    width: int = 64,
    epochs: int = 50,
    batch_size: int = 256,
    learning_rate: float = 1e-3,
    seed: int = 0,
) -> NetworkModel:
    """Train with mini-batch Adam; rows are reshuffled every epoch."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], int(hidden_layers), int(width), rng)
    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    step = 0
    history = []

    for epoch in range(int(epochs)):
        order = rng.permutation(X.shape[0])
        epoch_loss = 0.0
        for start in range(0, X.shape[0], int(batch_size)):
            batch = order[start : start + int(batch_size)]
            loss, grads = loss_and_gradients(params, X[batch], y[batch], task)
            epoch_loss += loss * len(batch)
            step += 1
            correction1 = 1.0 - ADAM_BETA1**step
            correction2 = 1.0 - ADAM_BETA2**step
            for layer, (gW, gb) in enumerate(grads):
                mW, mb = m[layer]
                vW, vb = v[layer]
                mW = ADAM_BETA1 * mW + (1 - ADAM_BETA1) * gW
                mb = ADAM_BETA1 * mb + (1 - ADAM_BETA1) * gb
                vW = ADAM_BETA2 * vW + (1 - ADAM_BETA2) * gW**2
                vb = ADAM_BETA2 * vb + (1 - ADAM_BETA2) * gb**2
                m[layer] = (mW, mb)
                v[layer] = (vW, vb)
                W, b = params[layer]
                W = W - learning_rate * (mW / correction1) / (np.sqrt(vW / correction2) + ADAM_EPS)
                b = b - learning_rate * (mb / correction1) / (np.sqrt(vb / correction2) + ADAM_EPS)
                params[layer] = (W, b)
        history.append(epoch_loss / X.shape[0])
        logger.debug(f"network epoch {epoch + 1}/{epochs}: loss {history[-1]:.6g}")

    return NetworkModel(
        task=task,
        params=tuple(params),
        hidden_layers=int(hidden_layers),
        loss_history=tuple(history),
        n_features=X.shape[1],
    )
