"""Residual network forward pass, initialization, encoding, checkpoints."""

import numpy as np
import pytest

from friedrichs.autodiff import Tape, Tensor
from friedrichs.networks import (
    BoundaryEncoder,
    ConstrainedNet,
    ResNet,
    ResNetConfig,
    ResNetParams,
    SubnetStack,
    init_params,
    load_checkpoint,
    resnet_forward,
    save_checkpoint,
)


def straight_line_forward(params, X, act):
    """Independent loop-based re-implementation of the block recursion."""
    outs = []
    L = len(params.W)
    for x in X:
        h_prev2, h_prev1 = None, params.V @ x
        for layer in range(1, L + 1):
            g = act(params.W[layer - 1] @ h_prev1 + params.b[layer - 1])
            h = (h_prev2 + g) if (layer % 2 == 0 and h_prev2 is not None) else g
            h_prev2, h_prev1 = h_prev1, h
        outs.append(params.a.T @ h_prev1)
    return np.stack(outs)


def test_zero_weights_zero_output():
    cfg = ResNetConfig(d=3, r=2, m=5, L=4)
    p = init_params(cfg, seed=0)
    p.V[:] = 0
    for w in p.W:
        w[:] = 0
    p.a[:] = 0
    X = np.random.default_rng(0).normal(size=(7, 3))
    assert np.all(resnet_forward(p, X, cfg) == 0.0)


def test_hand_evaluated_two_layer_relu():
    # m=1, d=1, V=W1=W2=a=1, b=0, relu, x=2:
    # h0=2, g1=2, h1=2 (odd skip is zero), g2=2, h2=h0+2=4, out=4
    cfg = ResNetConfig(d=1, r=1, m=1, L=2, activation="relu")
    p = ResNetParams(V=np.array([[1.0]]),
                     W=[np.array([[1.0]]), np.array([[1.0]])],
                     b=[np.zeros(1), np.zeros(1)],
                     a=np.array([[1.0]]))
    out = resnet_forward(p, np.array([[2.0]]), cfg)
    assert out[0, 0] == 4.0
    ref = straight_line_forward(p, np.array([[2.0]]), lambda z: np.maximum(z, 0))
    assert ref[0, 0] == 4.0


def test_forward_matches_straight_line_reimplementation():
    cfg = ResNetConfig(d=2, r=1, m=6, L=7, activation="tanh")
    net = ResNet.create(cfg, seed=21)
    X = np.random.default_rng(1).uniform(-1, 1, (9, 2))
    got = net.forward(X)
    ref = straight_line_forward(net.params, X, np.tanh)
    np.testing.assert_allclose(got, ref, rtol=1e-13)


def test_skip_structure_closed_form():
    # with all W=0, b=0: g_l = act(0) = 0, so h_L = h_0 for even L, 0 for odd L
    rng = np.random.default_rng(2)
    for L, expect_passthrough in ((7, False), (6, True)):
        cfg = ResNetConfig(d=2, r=1, m=4, L=L, activation="relu")
        p = init_params(cfg, seed=3)
        for w in p.W:
            w[:] = 0
        X = rng.uniform(-1, 1, (5, 2))
        out = resnet_forward(p, X, cfg)
        expected = (X @ p.V.T) @ p.a if expect_passthrough else np.zeros((5, 1))
        np.testing.assert_allclose(out, expected, atol=1e-15)


def test_tanh_output_interval_bound():
    # |out| <= ||a||_1 * (L+1) * max(1, ||V||_inf ||x||_inf)
    cfg = ResNetConfig(d=3, r=1, m=10, L=7, activation="tanh")
    net = ResNet.create(cfg, seed=4)
    X = np.random.default_rng(5).uniform(-1, 1, (200, 3))
    out = net.forward(X)
    assert np.all(np.isfinite(out))
    a_l1 = np.abs(net.params.a).sum()
    v_inf = np.abs(net.params.V).sum(axis=1).max()
    bound = a_l1 * (cfg.L + 1) * max(1.0, v_inf * np.abs(X).max())
    assert np.abs(out).max() <= bound


def test_init_deterministic_and_bounded():
    cfg = ResNetConfig(d=4, r=1, m=16, L=7, activation="relu")
    p1 = init_params(cfg, seed=42)
    p2 = init_params(cfg, seed=42)
    assert np.array_equal(p1.V, p2.V) and np.array_equal(p1.a, p2.a)
    for w1, w2 in zip(p1.W, p2.W):
        assert np.array_equal(w1, w2)
    # Kaiming bound for fan_in = m
    bound = np.sqrt(6.0 / cfg.m)
    for w in p1.W:
        assert np.abs(w).max() <= bound
    for b in p1.b:
        assert np.all(b == 0.0)


def test_two_seeds_differ_almost_everywhere():
    cfg = ResNetConfig(d=4, r=1, m=16, L=7)
    p1 = init_params(cfg, seed=1)
    p2 = init_params(cfg, seed=2)
    flat1 = np.concatenate([p1.V.ravel(), p1.a.ravel()] + [w.ravel() for w in p1.W])
    flat2 = np.concatenate([p2.V.ravel(), p2.a.ravel()] + [w.ravel() for w in p2.W])
    assert np.mean(flat1 != flat2) >= 0.99


def test_unknown_scheme_rejected():
    cfg = ResNetConfig(d=2, m=4, L=2)
    with pytest.raises(ValueError):
        init_params(cfg, seed=0, scheme="orthogonal")


def test_shape_mismatch_rejected():
    cfg = ResNetConfig(d=3, m=4, L=2)
    net = ResNet.create(cfg, seed=0)
    with pytest.raises(ValueError):
        net.forward(np.zeros((5, 2)))


# ---------------------------------------------------------------------------
# boundary encoders
# ---------------------------------------------------------------------------

def unit_ball_encoder():
    return BoundaryEncoder(h=lambda c: sum(x * x for x in c) - 1.0, b=None)


def test_unit_ball_encoder_vanishes_on_sphere():
    cfg = ResNetConfig(d=3, m=6, L=3, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=6), unit_ball_encoder())
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    assert np.abs(net.values(X)).max() <= 1e-12


def test_hypercube_encoder_vanishes_on_faces():
    d = 4

    def h(c):
        out = c[0] * c[0] - 1.0
        for x in c[1:]:
            out = out * (x * x - 1.0)
        return out

    cfg = ResNetConfig(d=d, m=5, L=2, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=8), BoundaryEncoder(h=h))
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, (50, d))
    for k in range(d):
        for v in (-1.0, 1.0):
            F = X.copy()
            F[:, k] = v
            assert np.abs(net.values(F)).max() <= 1e-12


def test_cosine_inflow_mask_square():
    # h = cos(-pi/4 + pi x/4) cos(-pi/4 + pi y/4): zero on x=-1 and y=-1,
    # nonzero at (1, 1)
    def h(c):
        return np.cos(-np.pi / 4 + np.pi * c[0] / 4) * np.cos(-np.pi / 4 + np.pi * c[1] / 4)

    from friedrichs.autodiff import eval_columns
    y = np.linspace(-1, 1, 20)
    left = np.stack([-np.ones(20), y], axis=1)
    bottom = np.stack([y, -np.ones(20)], axis=1)
    assert np.abs(eval_columns(h, left)).max() <= 1e-12
    assert np.abs(eval_columns(h, bottom)).max() <= 1e-12
    assert abs(eval_columns(h, np.array([[1.0, 1.0]]))[0, 0]) > 0.9


def test_encoded_value_and_data_match_on_boundary():
    # phi = h phi_hat + b equals b exactly where h = 0
    def h(c):
        return c[0]

    def b(c):
        return np.sin(c[1]) + 2.0

    cfg = ResNetConfig(d=2, m=8, L=3, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=10), BoundaryEncoder(h=h, b=b))
    y = np.random.default_rng(11).uniform(-1, 1, 64)
    B = np.stack([np.zeros(64), y], axis=1)
    np.testing.assert_allclose(net.values(B)[:, 0], np.sin(y) + 2.0, atol=1e-14)


def test_constrained_jacobian_matches_finite_differences():
    def h(c):
        return (c[0] * c[0] - 1.0) * (c[1] * c[1] - 1.0)

    def b(c):
        return np.sin(c[0]) * np.cos(c[1])

    cfg = ResNetConfig(d=2, m=7, L=4, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=12), BoundaryEncoder(h=h, b=b))
    X = np.random.default_rng(13).uniform(-0.9, 0.9, (20, 2))
    val, J = net.jacobian(X)
    n = X.shape[0]
    eps = 1e-5
    for k in range(2):
        Xp, Xm = X.copy(), X.copy()
        Xp[:, k] += eps
        Xm[:, k] -= eps
        fd = (net.values(Xp) - net.values(Xm)) / (2 * eps)
        got = J[k * n:(k + 1) * n]
        rel = np.abs(got - fd) / np.maximum(np.abs(fd), 1e-10)
        assert rel.max() <= 1e-6


def test_constrained_second_derivatives_match_finite_differences():
    def h(c):
        return (c[0] * c[0] - 1.0) * (c[1] * c[1] - 1.0)

    cfg = ResNetConfig(d=2, m=6, L=3, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=14), BoundaryEncoder(h=h))
    X = np.random.default_rng(15).uniform(-0.8, 0.8, (15, 2))
    _, _, S = net.jet(X)
    n = X.shape[0]
    eps = 1e-4
    for k in range(2):
        Xp, Xm = X.copy(), X.copy()
        Xp[:, k] += eps
        Xm[:, k] -= eps
        fd2 = (net.values(Xp) - 2 * net.values(X) + net.values(Xm)) / eps**2
        got = S[k * n:(k + 1) * n]
        assert np.abs(got - fd2).max() <= 1e-5


def test_tensor_path_matches_plain_path():
    cfg = ResNetConfig(d=2, m=5, L=3, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=16),
                         BoundaryEncoder(h=lambda c: c[0] * c[1]))
    X = np.random.default_rng(17).uniform(-1, 1, (8, 2))
    plain_v, plain_J = net.jacobian(X)
    with Tape():
        pt = net.tensor_params()
        tv, tJ = net.jacobian(X, pt)
    np.testing.assert_array_equal(plain_v, tv.data)
    np.testing.assert_array_equal(plain_J, tJ.data)


def test_subnet_stack_concatenates_components():
    cfg = ResNetConfig(d=3, m=4, L=2, activation="tanh")
    stack = SubnetStack.create(cfg, n_subnets=3, seed=18)
    X = np.random.default_rng(19).uniform(-1, 1, (6, 3))
    out = stack.forward(X)
    assert out.shape == (6, 3)
    for i, sub in enumerate(stack.nets):
        np.testing.assert_array_equal(out[:, i:i + 1], sub.forward(X))


def test_frozen_closure_matches_network():
    cfg = ResNetConfig(d=2, m=6, L=3, activation="tanh")
    net = ConstrainedNet(ResNet.create(cfg, seed=20),
                         BoundaryEncoder(h=lambda c: c[0], b=lambda c: np.cos(c[1])))
    X = np.random.default_rng(21).uniform(-1, 1, (10, 2))
    closure = net.as_closure()
    from friedrichs.autodiff import eval_columns, value_and_grad
    np.testing.assert_allclose(eval_columns(closure, X), net.values(X), rtol=1e-14)
    v, g = value_and_grad(closure, X)
    _, J = net.jacobian(X)
    n = X.shape[0]
    for k in range(2):
        np.testing.assert_allclose(g[:, 0, k], J[k * n:(k + 1) * n, 0], rtol=1e-12, atol=1e-14)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    cfg = ResNetConfig(d=3, m=9, L=7, activation="relu")
    net = ResNet.create(cfg, seed=22)
    arrays = net.param_arrays()
    path = tmp_path / "net.ckpt"
    save_checkpoint(str(path), arrays, meta={"width": 9, "depth": 7})
    loaded, meta = load_checkpoint(str(path))
    assert meta == {"width": 9, "depth": 7}
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert np.array_equal(loaded[k], arrays[k])


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_checkpoint(str(path))


def test_relu_power_activation_forward_and_jacobian():
    cfg = ResNetConfig(d=2, m=5, L=2, activation="relu^2")
    assert cfg.relu_power == 2
    net = ConstrainedNet(ResNet.create(cfg, seed=23))
    X = np.random.default_rng(24).uniform(-1, 1, (30, 2))
    out = net.values(X)
    assert np.all(np.isfinite(out))
    _, J = net.jacobian(X)
    eps = 1e-6
    for k in range(2):
        Xp, Xm = X.copy(), X.copy()
        Xp[:, k] += eps
        Xm[:, k] -= eps
        fd = (net.values(Xp) - net.values(Xm)) / (2 * eps)
        got = J[k * 30:(k + 1) * 30]
        assert np.abs(got - fd).max() <= 1e-6
