"""Backpropagation vs central finite differences on random micro-networks."""

import numpy as np
import pytest

from tpctrack.nncore import (
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2D,
    Network,
    add_l2_grads,
)
from tpctrack.nncore.losses import LOSSES

from oracles import finite_diff_gradients

FD_STEP = 1e-5
TOL = 1e-4


def analytic_gradients(network, x, y, loss_kind, lam, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    yhat = network.forward(x, train=True, rng=rng)
    _, grad_fn = LOSSES[loss_kind]
    network.zero_grads()
    network.backward(grad_fn(yhat, y))
    add_l2_grads(network, lam, x.shape[0])
    return [g.copy() for _, _, g in network.gradients()]


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def check_network(network, x, y, loss_kind, lam=0.0, seed=0):
    analytic = analytic_gradients(network, x, y, loss_kind, lam, rng_seed=seed)
    numeric = finite_diff_gradients(network, x, y, loss_kind, lam,
                                    step=FD_STEP, rng_seed=seed)
    err = max_rel_error(analytic, numeric)
    assert err < TOL, f"gradient mismatch {err:.3e}"


def _random_dense_net(rng, activation, out_act, n_out):
    net = Network([
        Dense(5, 4, activation),
        Dropout(0.8),
        Dense(4, n_out, out_act),
    ])
    net.initialize(rng)
    return net


@pytest.mark.parametrize("hidden_act", ["relu", "tanh", "sigmoid", "identity"])
def test_dense_stack_bce(hidden_act):
    rng = np.random.default_rng(hash(hidden_act) % 2**32)
    net = _random_dense_net(rng, hidden_act, "sigmoid", 1)
    x = rng.standard_normal((6, 5))
    y = rng.integers(0, 2, (6, 1)).astype(float)
    check_network(net, x, y, "bce", lam=0.1, seed=3)


def test_dense_softmax_cce():
    rng = np.random.default_rng(42)
    net = _random_dense_net(rng, "relu", "softmax", 3)
    x = rng.standard_normal((5, 5))
    y = np.eye(3)[rng.integers(0, 3, 5)]
    check_network(net, x, y, "cce", lam=0.05, seed=1)


def test_conv_pool_stack_both_losses():
    rng = np.random.default_rng(7)
    for loss_kind, n_out in (("bce", 2), ("cce", 3)):
        net = Network([
            Conv2D(3, 3, 1, 2, "relu"),
            MaxPool2D(2, 2, 2),
            Conv2D(3, 3, 2, 3, "tanh"),
            Flatten(),
            Dense(3 * 3 * 3, n_out, "sigmoid" if loss_kind == "bce" else "softmax"),
        ])
        net.initialize(rng)
        x = rng.standard_normal((3, 6, 6, 1))
        y = np.eye(n_out)[rng.integers(0, n_out, 3)]
        check_network(net, x, y, loss_kind, lam=0.2, seed=11)


def test_twenty_random_micro_networks():
    """Acceptance-style sweep: every layer kind, both losses, random shapes."""
    rng = np.random.default_rng(123)
    for case in range(20):
        loss_kind = "bce" if case % 2 == 0 else "cce"
        n_out = 1 if loss_kind == "bce" else int(rng.integers(2, 4))
        out_act = "sigmoid" if loss_kind == "bce" else "softmax"
        side = int(rng.integers(4, 7))
        filters = int(rng.integers(1, 3))
        pooled = (side - 2) // 2 + 1
        hidden = int(rng.integers(2, 5))
        net = Network([
            Conv2D(3, 3, 1, filters, str(rng.choice(["relu", "tanh", "identity"]))),
            MaxPool2D(2, 2, 2),
            Flatten(),
            Dropout(float(rng.uniform(0.6, 1.0))),
            Dense(pooled * pooled * filters, hidden, "relu"),
            Dense(hidden, n_out, out_act),
        ])
        net.initialize(rng)
        x = rng.standard_normal((2, side, side, 1))
        if loss_kind == "bce":
            y = rng.integers(0, 2, (2, n_out)).astype(float)
        else:
            y = np.eye(n_out)[rng.integers(0, n_out, 2)]
        lam = float(rng.choice([0.0, 0.1, 1.0]))
        check_network(net, x, y, loss_kind, lam=lam, seed=case)


def test_l2_gradient_alone():
    net = Network([Dense(3, 2, "identity")])
    rng = np.random.default_rng(0)
    net.initialize(rng)
    lam, m = 0.7, 4
    net.zero_grads()
    add_l2_grads(net, lam, m)
    np.testing.assert_allclose(net.layers[0].gw, lam / m * net.layers[0].w)
    np.testing.assert_allclose(net.layers[0].gb, 0.0)


def test_zero_input_gives_zero_weight_gradient():
    net = Network([Dense(3, 2, "sigmoid")])
    rng = np.random.default_rng(1)
    net.initialize(rng)
    x = np.zeros((4, 3))
    y = np.ones((4, 2))
    yhat = net.forward(x)
    _, grad_fn = LOSSES["bce"]
    net.zero_grads()
    net.backward(grad_fn(yhat, y))
    np.testing.assert_allclose(net.layers[0].gw, 0.0)
