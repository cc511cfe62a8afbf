import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from isinggan.nn import (Activation, Adam, Dense, Lookup, Sequential, activation_apply, activation_gradient,
                         adam_step, dense_apply, dense_gradient, grad_check, grad_check_module, lookup_embed, mlp)


def test_dense_identity_and_bias():
    x = np.arange(4.0)
    np.testing.assert_array_equal(dense_apply(np.eye(4), np.zeros(4), x), x)
    np.testing.assert_array_equal(dense_apply(np.zeros((3, 4)), np.full(3, 2.5), x), [2.5] * 3)
    with pytest.raises(ValueError):
        dense_apply(np.eye(4), np.zeros(4), np.ones(3))


def test_dense_gradient_8x5_central_differences():
    rng = np.random.default_rng(0)
    W, b, x, u = rng.normal(size=(8, 5)), rng.normal(size=8), rng.normal(size=5), rng.normal(size=8)
    dx, dW, db = dense_gradient(W, b, x, u)

    def loss():
        return float(u @ dense_apply(W, b, x))

    rep = grad_check(loss, {"W": W, "b": b, "x": x}, {"W": dW, "b": db, "x": dx}, step=1e-3)
    assert rep.max_rel_error < 1e-3 and rep.checked == 40 + 8 + 5


def test_dense_gradient_shape_errors():
    with pytest.raises(ValueError):
        dense_gradient(np.eye(3), np.zeros(3), np.ones(2), np.ones(3))


def test_activations():
    assert activation_apply("tanh", np.array(0.0)) == 0
    x = np.linspace(-20, 20, 101)
    t = activation_apply("tanh", x)
    assert np.all(np.abs(t) <= 1)
    assert np.all(np.abs(activation_apply("tanh", np.linspace(-5, 5, 11))) < 1)
    assert activation_apply("leaky_relu", np.array([-1.0]))[0] == pytest.approx(-0.2)
    assert activation_apply("leaky_relu", np.array([3.0]))[0] == 3.0
    with pytest.raises(ValueError):
        activation_apply("relu6", x)
    with pytest.raises(ValueError):
        activation_gradient("relu6", x, x)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(-4, 4)).filter(lambda a: np.all(np.abs(a) > 1e-3)))
def test_activation_derivatives_match_fd(x):
    h = 1e-6
    for kind in ("tanh", "leaky_relu"):
        fd = (activation_apply(kind, x + h) - activation_apply(kind, x - h)) / (2 * h)
        np.testing.assert_allclose(activation_gradient(kind, x, np.ones_like(x)), fd, rtol=1e-6, atol=1e-8)


def test_lookup():
    table = np.eye(4)
    np.testing.assert_array_equal(lookup_embed(table, 2), [0, 0, 1, 0])
    with pytest.raises(IndexError):
        lookup_embed(table, 4)
    with pytest.raises(IndexError):
        lookup_embed(table, -1)
    lut = Lookup(5, 3, np.random.default_rng(0))
    lut.forward(np.array([1, 1, 3]))
    lut.backward(np.ones((3, 3)))
    g = lut.grads["rows"]
    np.testing.assert_array_equal(g[[0, 2, 4]], 0)
    np.testing.assert_array_equal(g[1], 2)
    np.testing.assert_array_equal(g[3], 1)
    with pytest.raises(ValueError):
        Lookup(0, 3)


def test_initialization_scheme_and_determinism():
    d = Dense(50, 20, np.random.default_rng(1))
    assert np.abs(d.params["W"]).max() <= np.sqrt(1 / 50)
    assert d.params["W"].dtype == np.float32
    d2 = Dense(50, 20, np.random.default_rng(1))
    np.testing.assert_array_equal(d.params["W"], d2.params["W"])
    rows = Lookup(400, 50, np.random.default_rng(2)).params["rows"]
    assert rows.std() == pytest.approx(0.02, rel=0.05)
    a = mlp([6, 9, 3], "tanh", np.random.default_rng(3))
    b = mlp([6, 9, 3], "tanh", np.random.default_rng(3))
    for (ka, va), (kb, vb) in zip(a.named_parameters(), b.named_parameters()):
        assert ka == kb
        np.testing.assert_array_equal(va, vb)


def test_adam_zero_gradient_keeps_parameters():
    p = {"w": np.array([1.0, -2.0], np.float32)}
    opt = Adam()
    adam_step(opt, p, {"w": np.zeros(2, np.float32)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


@pytest.mark.parametrize("g", [0.5, -3.0, 1e-3])
def test_adam_first_step_magnitude(g):
    lr, b2, eps = 1e-4, 0.99, 1e-8
    expected = lr * abs(g) / (np.sqrt(g * g * (1 - b2) / (1 - b2)) + eps)
    p = {"w": np.array([0.0])}
    Adam().step(p, {"w": np.array([g])})
    assert abs(p["w"][0]) == pytest.approx(expected, rel=1e-12)
    assert np.sign(p["w"][0]) == -np.sign(g)


def test_adam_deterministic_and_finite():
    rng = np.random.default_rng(4)
    grads = [rng.normal(size=(3, 3)).astype(np.float32) * 10.0 ** rng.integers(-8, 8) for _ in range(30)]
    runs = []
    for _ in range(2):
        p = {"w": np.ones((3, 3), np.float32)}
        opt = Adam(1e-2, (0.5, 0.99))
        for g in grads:
            opt.step(p, {"w": g})
        runs.append(p["w"])
    np.testing.assert_array_equal(*runs)
    assert np.all(np.isfinite(runs[0]))


def test_adam_errors():
    p = {"w": np.zeros(2)}
    with pytest.raises(ValueError):
        Adam().step(p, {"w": np.zeros(3)})
    with pytest.raises(ValueError):
        Adam().step(p, {})
    with pytest.raises(FloatingPointError):
        Adam().step(p, {"w": np.array([np.nan, 0])})
    with pytest.raises(ValueError):
        Adam(lr=0)


def test_grad_check_linear_network():
    net = Sequential(Dense(5, 4, np.random.default_rng(0)), Dense(4, 3, np.random.default_rng(1)))
    rep = grad_check_module(net, np.random.default_rng(2).normal(size=(6, 5)), include_input=True)
    assert rep.max_rel_error < 1e-6


def test_grad_check_two_layer_tanh():
    rng = np.random.default_rng(3)
    net = mlp([4, 7, 2], "tanh", rng, final_activation="tanh")
    rep = grad_check_module(net, rng.normal(size=(5, 4)))
    assert rep.passed and rep.max_rel_error < 1e-3
    assert rep.worst_parameter in dict(net.named_parameters())
    assert len(rep.worst_index) in (1, 2)


def test_grad_check_reports_a_wrong_gradient():
    W = np.random.default_rng(0).normal(size=(3, 3))
    rep = grad_check(lambda: float((W ** 2).sum()), {"W": W}, {"W": 2 * W * (np.arange(9).reshape(3, 3) != 5)})
    assert not rep.passed
    assert rep.worst_parameter == "W" and rep.worst_index == (1, 2)


@pytest.mark.parametrize("layer_type", ["dense", "tanh", "leaky_relu", "lookup"])
def test_every_layer_type_20_configurations(layer_type):
    rng = np.random.default_rng(hash(layer_type) % 2**32)
    for _ in range(20):
        a, b, batch = (int(v) for v in rng.integers(1, 9, size=3))
        if layer_type == "dense":
            m, x = Dense(a, b, rng), rng.normal(size=(batch, a))
        elif layer_type == "lookup":
            m, x = Lookup(a + 1, b, rng), rng.integers(0, a + 1, size=batch)
        else:
            m = Sequential(Dense(a, b, rng), Activation(layer_type))
            x = rng.normal(size=(batch, a))
        rep = grad_check_module(m, x, include_input=layer_type != "lookup")
        assert rep.passed, rep


def test_module_astype_is_deep_copy():
    m = Dense(3, 2, np.random.default_rng(0))
    m64 = m.astype(np.float64)
    m64.params["W"][:] = 0
    assert m.params["W"].any() and m64.dtype == np.float64 and m.dtype == np.float32


def test_load_parameters_checks_names_and_shapes():
    m = mlp([3, 4, 2], "tanh", np.random.default_rng(0))
    values = {k: np.zeros_like(v) for k, v in m.parameters().items()}
    m.load_parameters(values)
    assert not any(v.any() for v in m.parameters().values())
    with pytest.raises(ValueError):
        m.load_parameters({**values, "0.W": np.zeros((1, 1), np.float32)})
    with pytest.raises(KeyError):
        m.load_parameters({k: v for k, v in list(values.items())[1:]})
    before = {k: v.copy() for k, v in m.parameters().items()}
    with pytest.raises(ValueError):
        m.load_parameters({**{k: np.ones_like(v) for k, v in values.items()}, "2.b": np.ones(5)})
    for k, v in m.parameters().items():
        np.testing.assert_array_equal(v, before[k])
