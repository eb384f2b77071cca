"""Preset construction: exact solutions, data functions, encoders, tables."""

import numpy as np
import pytest

from friedrichs import autodiff as ad
from friedrichs import problems
from friedrichs.systems import coercivity_check, forward_apply, symmetry_defect


def pde_residual(preset, X):
    """|T u* - f| with analytic derivatives of the exact solution."""
    closure = preset.exact_system if preset.exact_system is not None else preset.exact
    v, g, _ = ad.value_grad_diag2(closure, X)
    stacked = np.ascontiguousarray(np.moveaxis(g, 2, 0).reshape(-1, g.shape[1]))
    Tu = forward_apply(preset.system, v, stacked, X)
    return np.abs(Tu - preset.system.f_at(X))


@pytest.mark.parametrize("name", problems.PRESET_NAMES)
def test_exact_solution_satisfies_pde(name):
    p = problems.preset(name)
    X = p.domain.sample_interior(1000, np.random.default_rng(1))
    if name == "advection-discontinuous":
        X = X[np.abs(X[:, 1] - 0.9 * X[:, 0]) > 1e-3]
    res = pde_residual(p, X)
    assert res.max() <= 1e-8, (name, res.max())


@pytest.mark.parametrize("name,mu0", [
    ("advection-discontinuous", 1.0),
    ("advection-fan", 0.01),
    ("advection-winding", 0.1),
    ("elliptic-15d", 1.0),
    ("wave-complex-domain", 0.1),
    ("maxwell-cube", 1.0),
])
def test_preset_coercivity(name, mu0):
    p = problems.preset(name)
    X = p.domain.sample_interior(10000, np.random.default_rng(2))
    rep = coercivity_check(p.system, X)
    assert rep.ok
    assert rep.mu0_empirical >= mu0 - 1e-9, (name, rep.mu0_empirical)


@pytest.mark.parametrize("name", problems.PRESET_NAMES)
def test_coefficient_symmetry(name):
    p = problems.preset(name)
    X = p.domain.sample_interior(10000, np.random.default_rng(3))
    assert symmetry_defect(p.system, X) <= 1e-12


def test_fan_exact_values():
    p = problems.preset("advection-fan")
    # at (x, y) = (0.5, 0): radius 0.5 makes the arctan factor vanish
    val = p.exact_values(np.array([[0.5, 0.0]]))
    np.testing.assert_allclose(val[0, 0], 0.0, atol=1e-14)


def test_discontinuous_exact_value_above_line():
    p = problems.preset("advection-discontinuous")
    val = p.exact_values(np.array([[0.0, 0.5]]))
    np.testing.assert_allclose(val[0, 0], 0.5, rtol=1e-12)


def test_winding_exact_initial_value():
    p = problems.preset("advection-winding")
    X = np.array([[0.0, 0.3, -0.2]])
    np.testing.assert_allclose(p.exact_values(X)[0, 0],
                               0.3**2 + (-0.2 - 0.5) ** 2, rtol=1e-12)


def test_wave_exact_shifted_form():
    p = problems.preset("wave-complex-domain")
    X = np.array([[0.5, 1.0, 0.25]])
    np.testing.assert_allclose(p.exact_values(X)[0, 0],
                               np.exp(-0.05) * np.sin(1.0 + 0.25 - 0.5), rtol=1e-12)


def test_maxwell_exact_tangential_trace_vanishes():
    p = problems.preset("maxwell-cube")
    Xb, nb, _, _ = p.domain.sample_boundary(10000, np.random.default_rng(4))
    E = p.exact_values(Xb)[:, 3:]
    cross = np.cross(E, nb)
    assert np.abs(cross).max() <= 1e-12


def test_elliptic_printed_data_matches_symbolic_divergence():
    # f as printed must equal -div(a grad u*) computed by forward mode
    p = problems.preset("elliptic-15d")
    X = p.domain.sample_interior(500, np.random.default_rng(5))
    _, g, h2 = ad.value_grad_diag2(p.exact, X)
    av, ag, _ = ad.value_grad_diag2(p.elliptic_data.a, X)
    lap = h2[:, 0, :].sum(axis=1)
    sym = -(ag[:, 0, :] * g[:, 0, :]).sum(axis=1) - av[:, 0] * lap
    printed = ad.eval_columns(p.elliptic_data.f, X)[:, 0]
    np.testing.assert_allclose(printed, sym, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("name", problems.PRESET_NAMES)
def test_boundary_encoders_exact_to_1e10(name):
    p = problems.preset(name)
    rng = np.random.default_rng(6)
    sol = p.build_solution_net(8, seed=11)
    test = p.build_test_net(8, seed=12)
    Xb, nb, idx, names = p.domain.sample_boundary(10000, rng)
    smask = np.array([n in set(p.classification.solution_pieces) for n in names])[idx]
    tmask = np.array([n in set(p.classification.test_pieces) for n in names])[idx]
    if smask.any():
        assert p.solution_bc_residual(sol, Xb[smask], nb[smask]).max() <= 1e-10
    if tmask.any():
        assert p.test_bc_residual(test, Xb[tmask], nb[tmask]).max() <= 1e-10


def test_exact_solution_matches_boundary_data():
    # the exact field itself satisfies the prescribed data on the
    # solution-constrained pieces
    for name in problems.PRESET_NAMES:
        p = problems.preset(name)
        if p.classification.g_d is None:
            continue
        Xb, nb, idx, names = p.domain.sample_boundary(4000, np.random.default_rng(7))
        keep = np.array([n in set(p.classification.solution_pieces) for n in names])[idx]
        if not keep.any():
            continue
        got = p.exact_values(Xb[keep])
        want = ad.eval_columns(p.classification.g_d, Xb[keep])
        assert np.abs(got - want).max() <= 1e-10, name


def test_table_defaults_exact():
    expected = {
        "advection-discontinuous": dict(
            N=90000, N_b=10000, eta_s0=3e-4, eta_t0=3e-3, nu_s=10000,
            nu_t=10000, m_s=(50, 250), m_t=150, theta_s=(2000,), theta_t=()),
        "advection-fan": dict(
            N=40000, N_b=10000, eta_s0=1e-5, eta_t0=1e-3, nu_s=10000,
            nu_t=10000, m_s=250, m_t=150, theta_s=(), theta_t=500, n=10000),
        "advection-winding": dict(
            N=40000, N_b=10000, eta_s0=1e-4, eta_t0=1e-3, n_s=1, n_t=1,
            nu_s=15000, nu_t=20000, m_s=250, m_t=150, theta_s=(), theta_t=()),
        "elliptic-15d": dict(
            N=10000, N_b=10000, eta_s0=1e-5, eta_t0=1e-4, nu_s=8000,
            nu_t=8000, m_s=150, m_t=150, theta_t=500, n=10000),
        "wave-complex-domain": dict(
            N=10000, N_b=10000, eta_s0=5e-4, eta_t0=1e-4, nu_s=5000,
            nu_t=5000, m_s=250, m_t=150, n=10000),
        "maxwell-cube": dict(
            N=50000, N_b=0, eta_s0=3e-6, eta_t0=3e-3, nu_s=8000,
            nu_t=15000, m_s=250, m_t=50, n=20000),
    }
    for name, fields in expected.items():
        cfg = problems.preset(name).train_defaults
        for key, value in fields.items():
            assert getattr(cfg, key) == value, (name, key, getattr(cfg, key))


def test_unknown_preset_rejected():
    with pytest.raises(KeyError):
        problems.preset("laplace-on-a-donut")


def test_geometry_override_wave_only():
    custom = problems.preset("wave-complex-domain",
                             geometry={"holes": [(0.5, 0.5, 0.1)]})
    assert len(custom.domain.holes) == 1
    with pytest.raises(ValueError):
        problems.preset("advection-fan", geometry={"holes": []})
    with pytest.raises(ValueError):
        problems.preset("wave-complex-domain", geometry={"radius": 2.0})


def test_exact_error_probe_delegates():
    from friedrichs.networks import ClosureField
    p = problems.preset("advection-fan")
    rep = problems.exact_error_probe(p, ClosureField(p.exact, 2), n_points=500)
    assert rep.e_l2 <= 1e-14
    assert rep.n_points == 500


def test_probe_points_fixed_per_preset():
    p = problems.preset("advection-fan")
    a = p.test_points(100)
    b = p.test_points(100)
    assert np.array_equal(a, b)
    q = problems.preset("advection-winding")
    assert q.test_points(100).shape[1] == 3
