"""Ordered layer stack with full forward/backward plumbing."""

from __future__ import annotations

import copy
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .layers import Conv2D, Dense, Layer, layer_from_spec


class Network:
    def __init__(self, layers: Sequence[Layer]):
        self.layers: List[Layer] = list(layers)

    def forward(self, x: np.ndarray, train: bool = False,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
        out = x
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        return out

    def backward(self, grad: np.ndarray, from_preactivation: bool = False,
                 stop_at: Optional[int] = None) -> np.ndarray:
        """Propagate dJ/d(output) back through the stack, accumulating
        parameter gradients.

        from_preactivation seeds the last layer at its pre-activation values
        (the layer must be Dense). stop_at returns the gradient with respect
        to the output of the given layer index without descending further.
        """
        lowest = 0 if stop_at is None else stop_at + 1
        for i in range(len(self.layers) - 1, lowest - 1, -1):
            layer = self.layers[i]
            if from_preactivation and i == len(self.layers) - 1:
                if not isinstance(layer, Dense):
                    raise ValueError("pre-activation backward needs a Dense head")
                grad = layer.backward_from_preactivation(grad)
            else:
                grad = layer.backward(grad)
        return grad

    def parameters(self) -> List[Tuple[int, str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                out.append((i, name, arr))
        return out

    def gradients(self) -> List[Tuple[int, str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads():
                out.append((i, name, arr))
        return out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def initialize(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.init_params(rng)

    def n_parameters(self) -> int:
        return sum(arr.size for _, _, arr in self.parameters())

    def get_state(self) -> List[np.ndarray]:
        return [arr.copy() for _, _, arr in self.parameters()]

    def set_state(self, state: Sequence[np.ndarray]) -> None:
        params = self.parameters()
        if len(state) != len(params):
            raise ValueError("state length mismatch")
        for (_, _, arr), value in zip(params, state):
            arr[...] = value

    def specs(self) -> List[dict]:
        return [layer.spec() for layer in self.layers]

    def last_conv_index(self) -> Optional[int]:
        idx = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv2D):
                idx = i
        return idx

    def clone(self) -> "Network":
        other = Network([layer_from_spec(s) for s in self.specs()])
        other.set_state(self.get_state())
        return other


def network_from_specs(specs: Sequence[dict]) -> Network:
    return Network([layer_from_spec(s) for s in specs])
