import numpy as np
import numpy.testing as npt

from tpctrack.nncore import SAG, SGD, Adam, Dense, Network
from tpctrack.nncore.losses import LOSSES


def _unit_net():
    net = Network([Dense(2, 1, "identity")])
    return net


def test_zero_gradient_leaves_params_unchanged():
    for make in (lambda: SGD(0.1), lambda: Adam(0.1)):
        net = _unit_net()
        net.layers[0].w[...] = [[1.0], [2.0]]
        before = net.get_state()
        net.zero_grads()
        make().step(net)
        for b, a in zip(before, net.get_state()):
            npt.assert_array_equal(b, a)


def test_sag_zero_residual_no_move():
    layer = Dense(3, 1, "identity")
    layer.w[...] = 1.0
    sag = SAG(0.1, n_examples=4, layer=layer)
    sag.step(0, np.zeros(3), np.zeros(1))
    npt.assert_array_equal(layer.w, np.ones((3, 1)))


def test_sgd_step_direction():
    net = _unit_net()
    net.layers[0].gw[...] = [[1.0], [-2.0]]
    SGD(0.5).step(net)
    npt.assert_allclose(net.layers[0].w, [[-0.5], [1.0]])


def test_adam_first_step_hand_value():
    # theta0 = 0, g = 1 constant, alpha=0.1: bias-corrected m^ = v^ = 1,
    # so theta1 = -0.1 / (1 + eps)
    net = _unit_net()
    adam = Adam(0.1)
    net.layers[0].gw[...] = 1.0
    net.layers[0].gb[...] = 1.0
    adam.step(net)
    npt.assert_allclose(net.layers[0].w, -0.1, rtol=1e-6)
    npt.assert_allclose(net.layers[0].b, -0.1, rtol=1e-6)


def test_adam_constant_gradient_keeps_unit_steps():
    net = _unit_net()
    adam = Adam(0.1)
    for _ in range(5):
        net.layers[0].gw[...] = 1.0
        adam.step(net)
    # with a constant gradient every bias-corrected step is -alpha
    npt.assert_allclose(net.layers[0].w, -0.5, rtol=1e-5)


def test_sag_single_example_is_full_gradient_descent():
    """With one example, SAG's memory average equals the full gradient."""
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 3))
    y = np.array([[1.0]])
    lr = 0.05

    sag_layer = Dense(3, 1, "sigmoid")
    gd_layer = Dense(3, 1, "sigmoid")
    sag = SAG(lr, n_examples=1, layer=sag_layer)

    for _ in range(20):
        yhat = sag_layer.forward(x)
        sag.step(0, x[0], (yhat[0] - y[0]))

        yhat = gd_layer.forward(x)
        _, grad_fn = LOSSES["bce"]
        gd_layer.zero_grads()
        gd_layer.backward(grad_fn(yhat, y))
        gd_layer.w -= lr * gd_layer.gw
        gd_layer.b -= lr * gd_layer.gb

    npt.assert_allclose(sag_layer.w, gd_layer.w, rtol=1e-12)
    npt.assert_allclose(sag_layer.b, gd_layer.b, rtol=1e-12)
