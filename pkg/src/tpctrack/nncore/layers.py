"""Differentiable layers with explicit forward caches and analytic backward passes.

All math is double precision. Data layout is channels-last: dense inputs are
(batch, features); convolutional inputs are (batch, height, width, channels).
Convolution kernels are stored as (m, n, in_channels, filters) where index
[0, 0] corresponds to the offset (-m//2, -n//2) of the centered triple-sum
formulation, i.e. the top-left tap of the zero-padded sliding window.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

ACTIVATIONS = ("identity", "relu", "tanh", "sigmoid", "softmax")


def _apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(0.0, z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "softmax":
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {kind!r}")


def _activation_backward(kind: str, grad_a: np.ndarray, z: np.ndarray,
                         a: np.ndarray) -> np.ndarray:
    """dJ/dz from dJ/da using cached pre/post-activation values."""
    if kind == "identity":
        return grad_a
    if kind == "relu":
        return grad_a * (z > 0.0)
    if kind == "tanh":
        return grad_a * (1.0 - a * a)
    if kind == "sigmoid":
        return grad_a * a * (1.0 - a)
    if kind == "softmax":
        inner = (grad_a * a).sum(axis=-1, keepdims=True)
        return a * (grad_a - inner)
    raise ValueError(f"unknown activation {kind!r}")


class Layer:
    """Base layer: parameters, gradient slots, cached forward state."""

    def params(self) -> List[Tuple[str, np.ndarray]]:
        return []

    def grads(self) -> List[Tuple[str, np.ndarray]]:
        return []

    def zero_grads(self) -> None:
        for _, g in self.grads():
            g[...] = 0.0

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, x: np.ndarray, train: bool = False,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


def _init_scale(fan_in: int, activation: str) -> float:
    # uniform(-a, a) with variance 2/fan_in for relu, 1/fan_in otherwise
    variance = 2.0 / fan_in if activation == "relu" else 1.0 / fan_in
    return math.sqrt(3.0 * variance)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, activation: str = "identity"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.w = np.zeros((n_in, n_out))
        self.b = np.zeros(n_out)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x: Optional[np.ndarray] = None
        self._z: Optional[np.ndarray] = None
        self._a: Optional[np.ndarray] = None

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [("w", self.gw), ("b", self.gb)]

    def init_params(self, rng):
        a = _init_scale(self.n_in, self.activation)
        self.w[...] = rng.uniform(-a, a, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"Dense expects {self.n_in} inputs, got {x.shape[-1]}")
        self._x = x
        self._z = x @ self.w + self.b
        self._a = _apply_activation(self.activation, self._z)
        return self._a

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called without a cached forward pass")
        dz = _activation_backward(self.activation, grad_out, self._z, self._a)
        return self.backward_from_preactivation(dz)

    def backward_from_preactivation(self, dz):
        """Backward given dJ/dz directly (used for class-score gradients)."""
        self.gw += self._x.T @ dz
        self.gb += dz.sum(axis=0)
        return dz @ self.w.T

    def spec(self):
        return {"kind": "dense", "n_in": self.n_in, "n_out": self.n_out,
                "activation": self.activation}


class Conv2D(Layer):
    """Same-padding 2-D convolution per the centered triple-sum formula,
    plus a per-filter bias. Kernel extents must be odd so the centered
    window is well defined."""

    def __init__(self, kernel_h: int, kernel_w: int, in_channels: int,
                 filters: int, activation: str = "identity"):
        if kernel_h % 2 == 0 or kernel_w % 2 == 0:
            raise ValueError("kernel extents must be odd")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.in_channels = in_channels
        self.filters = filters
        self.activation = activation
        self.w = np.zeros((kernel_h, kernel_w, in_channels, filters))
        self.b = np.zeros(filters)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._xp: Optional[np.ndarray] = None
        self._z: Optional[np.ndarray] = None
        self._a: Optional[np.ndarray] = None

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def grads(self):
        return [("w", self.gw), ("b", self.gb)]

    def init_params(self, rng):
        fan_in = self.kernel_h * self.kernel_w * self.in_channels
        a = _init_scale(fan_in, self.activation)
        self.w[...] = rng.uniform(-a, a, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        if c != self.in_channels:
            raise ValueError(f"Conv2D expects {self.in_channels} channels, got {c}")
        ph, pw = self.kernel_h // 2, self.kernel_w // 2
        if self.kernel_h > h + 2 * ph or self.kernel_w > w + 2 * pw:
            raise ValueError("kernel larger than padded input")
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        z = np.zeros((n, h, w, self.filters))
        for p in range(self.kernel_h):
            for q in range(self.kernel_w):
                patch = xp[:, p:p + h, q:q + w, :]
                z += patch @ self.w[p, q]
        z += self.b
        self._xp = xp
        self._z = z
        self._a = _apply_activation(self.activation, z)
        return self._a

    @property
    def cached_output(self) -> np.ndarray:
        if self._a is None:
            raise RuntimeError("no cached forward pass")
        return self._a

    def backward(self, grad_out):
        if self._xp is None:
            raise RuntimeError("backward called without a cached forward pass")
        dz = _activation_backward(self.activation, grad_out, self._z, self._a)
        n, h, w, s = dz.shape
        ph, pw = self.kernel_h // 2, self.kernel_w // 2
        dz_flat = dz.reshape(-1, s)
        gxp = np.zeros_like(self._xp)
        for p in range(self.kernel_h):
            for q in range(self.kernel_w):
                patch = self._xp[:, p:p + h, q:q + w, :]
                self.gw[p, q] += patch.reshape(-1, self.in_channels).T @ dz_flat
                gxp[:, p:p + h, q:q + w, :] += dz @ self.w[p, q].T
        self.gb += dz.sum(axis=(0, 1, 2))
        return gxp[:, ph:ph + h, pw:pw + w, :]

    def spec(self):
        return {"kind": "conv2d", "kernel_h": self.kernel_h, "kernel_w": self.kernel_w,
                "in_channels": self.in_channels, "filters": self.filters,
                "activation": self.activation}


class MaxPool2D(Layer):
    def __init__(self, pool_h: int, pool_w: int, stride: int):
        if pool_h < 1 or pool_w < 1 or stride < 1:
            raise ValueError("pool dims and stride must be positive")
        self.pool_h = pool_h
        self.pool_w = pool_w
        self.stride = stride
        self._x: Optional[np.ndarray] = None
        self._out: Optional[np.ndarray] = None

    def forward(self, x, train=False, rng=None):
        n, h, w, c = x.shape
        if h < self.pool_h or w < self.pool_w:
            raise ValueError("input smaller than pooling window")
        oh = (h - self.pool_h) // self.stride + 1
        ow = (w - self.pool_w) // self.stride + 1
        out = np.full((n, oh, ow, c), -np.inf)
        for p in range(self.pool_h):
            for q in range(self.pool_w):
                view = x[:, p:p + self.stride * oh:self.stride,
                         q:q + self.stride * ow:self.stride, :]
                np.maximum(out, view, out=out)
        self._x = x
        self._out = out
        return out

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called without a cached forward pass")
        n, oh, ow, c = grad_out.shape
        grad_in = np.zeros_like(self._x)
        unrouted = np.ones(grad_out.shape, dtype=bool)
        for p in range(self.pool_h):
            for q in range(self.pool_w):
                view = self._x[:, p:p + self.stride * oh:self.stride,
                               q:q + self.stride * ow:self.stride, :]
                take = (view == self._out) & unrouted
                unrouted &= ~take
                gview = grad_in[:, p:p + self.stride * oh:self.stride,
                                q:q + self.stride * ow:self.stride, :]
                gview[take] += grad_out[take]
        return grad_in

    def spec(self):
        return {"kind": "maxpool", "pool_h": self.pool_h, "pool_w": self.pool_w,
                "stride": self.stride}


class Dropout(Layer):
    """Random unit removal at train time; scaling by p_keep at inference."""

    def __init__(self, p_keep: float):
        if not 0.0 < p_keep <= 1.0:
            raise ValueError("p_keep must be in (0, 1]")
        self.p_keep = p_keep
        self._mask: Optional[np.ndarray] = None
        self._train = False

    def forward(self, x, train=False, rng=None):
        self._train = train
        if not train:
            self._mask = None
            return x * self.p_keep
        if self.p_keep == 1.0:
            self._mask = np.ones_like(x)
            return x
        if rng is None:
            raise ValueError("train-mode dropout requires an rng")
        self._mask = (rng.random(x.shape) < self.p_keep).astype(np.float64)
        return x * self._mask

    def backward(self, grad_out):
        if not self._train:
            return grad_out * self.p_keep
        if self._mask is None:
            raise RuntimeError("backward called without a cached forward pass")
        return grad_out * self._mask

    def spec(self):
        return {"kind": "dropout", "p_keep": self.p_keep}


class Flatten(Layer):
    def __init__(self):
        self._shape: Optional[Tuple[int, ...]] = None

    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if self._shape is None:
            raise RuntimeError("backward called without a cached forward pass")
        return grad_out.reshape(self._shape)

    def spec(self):
        return {"kind": "flatten"}


def layer_from_spec(spec: dict) -> Layer:
    kind = spec["kind"]
    if kind == "dense":
        return Dense(spec["n_in"], spec["n_out"], spec["activation"])
    if kind == "conv2d":
        return Conv2D(spec["kernel_h"], spec["kernel_w"], spec["in_channels"],
                      spec["filters"], spec["activation"])
    if kind == "maxpool":
        return MaxPool2D(spec["pool_h"], spec["pool_w"], spec["stride"])
    if kind == "dropout":
        return Dropout(spec["p_keep"])
    if kind == "flatten":
        return Flatten()
    raise ValueError(f"unknown layer kind {kind!r}")
