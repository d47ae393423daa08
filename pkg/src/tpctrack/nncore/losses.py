"""Cross-entropy losses with optional L2 weight penalty.

Predictions are clipped to [1e-12, 1 - 1e-12] before logarithms. The L2
term is (lambda / 2m) * sum(w^2) over weight matrices only; biases are
excluded from the penalty. Natural logarithms throughout.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

CLIP = 1e-12


def _clip(yhat: np.ndarray) -> np.ndarray:
    return np.clip(yhat, CLIP, 1.0 - CLIP)


def binary_cross_entropy(yhat: np.ndarray, y: np.ndarray) -> float:
    """Mean elementwise binary cross-entropy.

    Accepts a single sigmoid column (m,) / (m, 1) or a multi-unit sigmoid
    head (m, k) with one-hot targets; the mean runs over all entries so the
    single-unit case reduces to the classic form.
    """
    if yhat.shape[0] == 0:
        raise ValueError("empty prediction batch")
    p = _clip(np.asarray(yhat, dtype=np.float64))
    t = np.asarray(y, dtype=np.float64).reshape(p.shape)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def binary_cross_entropy_grad(yhat: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = _clip(np.asarray(yhat, dtype=np.float64))
    t = np.asarray(y, dtype=np.float64).reshape(p.shape)
    return -(t / p - (1.0 - t) / (1.0 - p)) / p.size


def categorical_cross_entropy(yhat: np.ndarray, y_onehot: np.ndarray) -> float:
    """-(1/m) sum_i sum_c y log yhat for softmax outputs."""
    if yhat.shape[0] == 0:
        raise ValueError("empty prediction batch")
    p = _clip(np.asarray(yhat, dtype=np.float64))
    t = np.asarray(y_onehot, dtype=np.float64)
    return float(-np.sum(t * np.log(p)) / p.shape[0])


def categorical_cross_entropy_grad(yhat: np.ndarray, y_onehot: np.ndarray) -> np.ndarray:
    p = _clip(np.asarray(yhat, dtype=np.float64))
    t = np.asarray(y_onehot, dtype=np.float64)
    return -(t / p) / p.shape[0]


LOSSES = {
    "bce": (binary_cross_entropy, binary_cross_entropy_grad),
    "cce": (categorical_cross_entropy, categorical_cross_entropy_grad),
}


def l2_penalty(weights: List[np.ndarray], lam: float, m: int) -> float:
    if lam == 0.0:
        return 0.0
    return lam / (2.0 * m) * sum(float(np.sum(w * w)) for w in weights)


def regularized_loss(kind: str, yhat: np.ndarray, y: np.ndarray,
                     weights: List[np.ndarray], lam: float) -> float:
    loss_fn, _ = LOSSES[kind]
    return loss_fn(yhat, y) + l2_penalty(weights, lam, np.asarray(yhat).shape[0])


def add_l2_grads(network, lam: float, m: int) -> None:
    """Accumulate (lambda/m) * w onto every weight gradient (biases skipped)."""
    if lam == 0.0:
        return
    for layer in network.layers:
        for (name, p), (_, g) in zip(layer.params(), layer.grads()):
            if name == "w":
                g += (lam / m) * p
