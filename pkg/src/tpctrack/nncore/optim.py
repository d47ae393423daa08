"""Parameter update rules: plain SGD, Adam, and SAG.

SAG keeps a per-example memory of output-layer residuals and steps along
the running average gradient. The factored memory (residuals rather than
full gradient copies) is exact for networks whose trainable parameters are
a single dense layer, which is how the linear models here are built; richer
stacks should use sgd or adam.
"""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .network import Network
from .layers import Dense


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, network: Network) -> None:
        for (_, _, p), (_, _, g) in zip(network.parameters(), network.gradients()):
            p -= self.lr * g


class Adam:
    """Bias-corrected first/second moment adaptive update."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Optional[List[np.ndarray]] = None
        self._v: Optional[List[np.ndarray]] = None

    def step(self, network: Network) -> None:
        params = network.parameters()
        grads = network.gradients()
        if self._m is None:
            self._m = [np.zeros_like(p) for _, _, p in params]
            self._v = [np.zeros_like(p) for _, _, p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for (_, _, p), (_, _, g), m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SAG:
    """Stochastic average gradient over a single dense layer.

    For head residuals delta_i = dL_i/dz_i, the per-example gradient is the
    outer product x_i delta_i^T, so the memory stores delta_i only and the
    average gradient is refreshed incrementally on each sampled example.
    """

    def __init__(self, lr: float, n_examples: int, layer: Dense):
        if n_examples < 1:
            raise ValueError("SAG needs at least one example")
        self.lr = lr
        self.n = n_examples
        self.layer = layer
        self.residuals = np.zeros((n_examples, layer.n_out))
        self.seen = np.zeros(n_examples, dtype=bool)
        self.sum_w = np.zeros_like(layer.w)
        self.sum_b = np.zeros_like(layer.b)

    @property
    def n_seen(self) -> int:
        return int(self.seen.sum())

    def step(self, index: int, x_i: np.ndarray, delta_i: np.ndarray,
             lam: float = 0.0) -> None:
        """Refresh example `index`'s memory entry and move along the average."""
        delta_old = self.residuals[index]
        diff = delta_i - delta_old
        self.sum_w += np.outer(x_i, diff)
        self.sum_b += diff
        self.residuals[index] = delta_i
        self.seen[index] = True
        denom = self.n_seen
        self.layer.w -= self.lr * (self.sum_w / denom + (lam / self.n) * self.layer.w)
        self.layer.b -= self.lr * (self.sum_b / denom)


def sag_learning_rate(x: np.ndarray, lam: float = 0.0) -> float:
    """Step size 1 / (0.25 * max_i ||x_i||^2 + lambda/m), the standard
    Lipschitz bound for logistic losses."""
    m = x.shape[0]
    max_sq = float(np.max(np.einsum("ij,ij->i", x, x))) if m else 1.0
    return 1.0 / (0.25 * max(max_sq, 1e-12) + lam / max(m, 1))
