"""Differentiation engine checks against finite differences and closed forms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from friedrichs import autodiff as ad
from friedrichs.autodiff import (
    DualBatch,
    Jet,
    NonScalarRootError,
    Tape,
    Tensor,
    UnsupportedPrimitiveError,
    forward_dual,
)
from friedrichs.networks import ConstrainedNet, ResNet, ResNetConfig


def central_diff(f, x, h=1e-5):
    """Scalar-function central difference, the independent derivative oracle."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# forward mode (jets / DualBatch)
# ---------------------------------------------------------------------------

def test_forward_dual_square():
    # f(x) = x^2 at x = 3: value 9, jacobian 6
    out = forward_dual(lambda cols: cols[0] * cols[0], np.array([[3.0]]))
    assert out.value[0, 0] == 9.0
    assert out.input_jacobian[0, 0, 0] == 6.0


def test_forward_dual_tanh_at_zero():
    out = forward_dual(lambda cols: np.tanh(cols[0]), np.array([[0.0]]))
    assert out.value[0, 0] == 0.0
    assert out.input_jacobian[0, 0, 0] == 1.0


def test_forward_dual_resnet_matches_central_differences():
    # random 3-layer net, 5 random points in [-1, 1]^2, rel err <= 1e-6
    rng = np.random.default_rng(7)
    cfg = ResNetConfig(d=2, r=1, m=8, L=3, activation="tanh")
    net = ResNet.create(cfg, seed=11)
    X = rng.uniform(-1.0, 1.0, size=(5, 2))
    closure = ConstrainedNet(net).as_closure()
    dual = forward_dual(closure, X)
    h = 1e-5
    for k in range(2):
        dX1, dX2 = X.copy(), X.copy()
        dX1[:, k] += h
        dX2[:, k] -= h
        fd = (net.forward(dX1) - net.forward(dX2)) / (2 * h)
        got = dual.input_jacobian[:, 0, k]
        rel = np.abs(got - fd[:, 0]) / np.maximum(np.abs(fd[:, 0]), 1e-12)
        assert rel.max() <= 1e-6


@pytest.mark.parametrize("fn,name", [
    (np.sin, "sin"), (np.cos, "cos"), (np.exp, "exp"), (np.tanh, "tanh"),
    (np.arctan, "arctan"), (lambda u: np.sqrt(u + 2.0), "sqrt"),
    (lambda u: np.log(u + 2.0), "log"), (lambda u: u ** 3, "power"),
    (lambda u: np.arcsin(0.9 * u), "arcsin"), (np.abs, "abs"),
])
def test_jet_primitives_match_central_differences(fn, name):
    # 100 random inputs per primitive, rel err <= 1e-6 at step 1e-5
    rng = np.random.default_rng(hash(name) % 2**32)
    x = rng.uniform(-1.0, 1.0, size=100)
    x = x[np.abs(x) > 1e-3]  # keep |x| away from kinks of abs
    jet = Jet(x, np.ones((x.size, 1)), np.zeros((x.size, 1)))
    out = fn(jet)
    fd = (fn(x + 1e-5) - fn(x - 1e-5)) / 2e-5
    rel = np.abs(out.g[:, 0] - fd) / np.maximum(np.abs(fd), 1e-10)
    assert rel.max() <= 1e-6


def test_jet_second_derivatives_composition():
    # d^2/dx^2 sin(x*y) = -y^2 sin(x*y), via diagonal jet propagation
    x = np.array([0.3, -0.7])
    y = np.array([1.1, 0.4])
    jx = Jet(x, np.stack([np.ones(2), np.zeros(2)], axis=1), np.zeros((2, 2)))
    jy = Jet(y, np.stack([np.zeros(2), np.ones(2)], axis=1), np.zeros((2, 2)))
    out = np.sin(jx * jy)
    np.testing.assert_allclose(out.h[:, 0], -y * y * np.sin(x * y), rtol=1e-12)
    np.testing.assert_allclose(out.h[:, 1], -x * x * np.sin(x * y), rtol=1e-12)


def test_unsupported_primitive_is_named():
    jet = Jet(np.ones(3), np.ones((3, 1)), np.zeros((3, 1)))
    with pytest.raises(UnsupportedPrimitiveError) as err:
        np.floor(jet)
    assert err.value.primitive == "floor"


def test_dualbatch_shape_contract():
    with pytest.raises(ad.AutodiffError):
        DualBatch(np.zeros((4, 2)), np.zeros((4, 3, 2)))


def test_where_follows_branch_derivative():
    x = np.linspace(-1, 1, 11)
    jet = Jet(x, np.ones((x.size, 1)), np.zeros((x.size, 1)))
    out = ad.where(x > 0, jet * jet, -jet)
    np.testing.assert_allclose(out.g[:, 0], np.where(x > 0, 2 * x, -1.0))


# ---------------------------------------------------------------------------
# reverse mode
# ---------------------------------------------------------------------------

def test_backward_quadratic_form():
    # loss = ||W x||^2 with fixed x: dloss/dW = 2 (W x) x^T
    rng = np.random.default_rng(3)
    W = Tensor(rng.normal(size=(4, 3)))
    x = rng.normal(size=(3, 1))
    with Tape() as tape:
        y = W @ x
        loss = (y * y).sum()
        grads = tape.gradients({"W": W}, root=loss)
    expected = 2.0 * (W.data @ x) @ x.T
    np.testing.assert_allclose(grads["W"], expected, rtol=1e-12)


def test_backward_through_input_derivative_symbolic():
    # loss = (d/dx tanh(w x))^2 at x = 0.3, w = 0.7.
    # Symbolic: dloss/dw = 2 w (1 - t^2)^2 (1 - 2 w x t), t = tanh(w x).
    w0, x0 = 0.7, 0.3
    cfg = ResNetConfig(d=1, r=1, m=1, L=1, activation="tanh")
    net = ResNet.create(cfg, seed=0)
    arrays = net.param_arrays()
    arrays["V"][:] = 1.0
    arrays["W1"][:] = w0
    arrays["b1"][:] = 0.0
    arrays["a"][:] = 1.0
    X = np.array([[x0]])
    with Tape() as tape:
        pt = {k: Tensor(v) for k, v in arrays.items()}
        _, J = net.forward_jac(X, pt)
        loss = (J * J).sum()
        grads = tape.gradients({"W1": pt["W1"]}, root=loss)
    t = np.tanh(w0 * x0)
    symbolic = 2.0 * w0 * (1 - t * t) ** 2 * (1.0 - 2.0 * w0 * x0 * t)
    np.testing.assert_allclose(grads["W1"][0, 0], symbolic, rtol=1e-12)


def test_zero_readout_blocks_hidden_gradients():
    cfg = ResNetConfig(d=2, r=1, m=4, L=2, activation="tanh")
    net = ResNet.create(cfg, seed=5)
    arrays = net.param_arrays()
    arrays["a"][:] = 0.0
    X = np.random.default_rng(0).uniform(-1, 1, (6, 2))
    with Tape() as tape:
        pt = {k: Tensor(v) for k, v in arrays.items()}
        out = net.forward(X, pt)
        loss = out.mean()
        grads = tape.gradients(pt, root=loss)
    for name in ("V", "W1", "W2", "b1", "b2"):
        assert np.all(grads[name] == 0.0)
    assert np.any(grads["a"] != 0.0)


def test_non_scalar_root_rejected():
    x = Tensor(np.ones((2, 2)))
    with Tape() as tape:
        y = x * 2.0
        with pytest.raises(NonScalarRootError):
            tape.backward(root=y)


def test_tape_replay_is_bit_identical():
    rng = np.random.default_rng(12)
    W = Tensor(rng.normal(size=(5, 5)))
    x = rng.normal(size=(5, 2))
    with Tape() as tape:
        y = (W @ x).tanh()
        loss = (y * y).mean()
        first = loss.data.copy()
        replayed = tape.replay()
    assert replayed == first


def test_gradients_are_deterministic():
    def run():
        rng = np.random.default_rng(99)
        W = Tensor(rng.normal(size=(6, 6)))
        x = rng.normal(size=(6, 3))
        with Tape() as tape:
            loss = ((W @ x).relu() ** 2).sum()
            return tape.gradients({"W": W}, root=loss)["W"]

    g1, g2 = run(), run()
    assert np.array_equal(g1, g2)


def test_backward_seed_scales_gradients():
    W = Tensor(np.eye(2))
    x = np.ones((2, 1))
    with Tape() as tape:
        loss = (W @ x).sum()
        tape.backward(root=loss, seed=3.0)
    np.testing.assert_allclose(W.grad, 3.0 * np.ones((2, 2)) * x.T)


def test_relu_derivative_at_zero_is_zero():
    x = Tensor(np.array([[0.0, -1.0, 2.0]]))
    with Tape() as tape:
        loss = x.relu().sum()
        grads = tape.gradients({"x": x}, root=loss)
    np.testing.assert_array_equal(grads["x"], np.array([[0.0, 0.0, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_scalar_graph_matches_finite_differences(a, b):
    def build(av):
        x = Tensor(np.array([[av]]))
        with Tape() as tape:
            y = (x * b + 0.5).tanh() * x + x * x
            loss = y.sum()
            g = tape.gradients({"x": x}, root=loss)["x"][0, 0]
        return float(loss.data), g

    loss0, grad = build(a)
    h = 1e-6
    lp, _ = build(a + h)
    lm, _ = build(a - h)
    fd = (lp - lm) / (2 * h)
    assert abs(grad - fd) <= 1e-6 * max(1.0, abs(fd))


def test_structural_ops_adjoints():
    # tile/repeat/slice/sum-block adjoints validated against finite differences
    rng = np.random.default_rng(4)
    base = rng.normal(size=(3, 2))
    w = rng.normal(size=(6, 2))

    def value(arr):
        x = Tensor(arr)
        with Tape() as tape:
            t = ad.tile_rows(x, 2)
            s = (t * w).sum() + (ad.sum_row_blocks(ad.repeat_rows(x, 2), 3) ** 2).sum()
            s = s + (ad.rows(x, 1, 3) * 2.0).sum()
            tape.backward(root=s)
        return float(s.data), x.grad

    v0, g = value(base)
    h = 1e-7
    for i in range(3):
        for j in range(2):
            bumped = base.copy()
            bumped[i, j] += h
            v1, _ = value(bumped)
            fd = (v1 - v0) / h
            assert abs(g[i, j] - fd) <= 1e-5 * max(1.0, abs(fd))


def test_batch_matvec_matches_einsum_and_fd():
    rng = np.random.default_rng(8)
    mats = rng.normal(size=(4, 3, 3))
    v = rng.normal(size=(4, 3))

    def value(arr):
        x = Tensor(arr)
        with Tape() as tape:
            out = ad.batch_matvec(mats, x)
            loss = (out * out).sum()
            tape.backward(root=loss)
        return float(loss.data), x.grad

    v0, g = value(v)
    np.testing.assert_allclose(v0, (np.einsum("nij,nj->ni", mats, v) ** 2).sum())
    h = 1e-7
    bumped = v.copy()
    bumped[2, 1] += h
    v1, _ = value(bumped)
    assert abs(g[2, 1] - (v1 - v0) / h) <= 1e-5 * max(1.0, abs(g[2, 1]))
