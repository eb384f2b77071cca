"""Estimator protocol: params round-trip, validation, fit/predict/score."""

import numpy as np
import pytest

from friedrichs.estimator import FriedrichsSolver, check_points


def test_get_set_params_round_trip():
    est = FriedrichsSolver(preset="advection-fan", n=25, seed=3)
    params = est.get_params()
    assert params["preset"] == "advection-fan"
    assert params["n"] == 25
    clone = FriedrichsSolver(**params)
    assert clone.get_params() == params
    clone.set_params(n=50, eta_s0=1e-4)
    assert clone.n == 50 and clone.eta_s0 == 1e-4


def test_set_params_rejects_unknown():
    with pytest.raises(ValueError):
        FriedrichsSolver().set_params(learning_rate=0.1)


def test_sklearn_clone_compatible():
    sklearn = pytest.importorskip("sklearn")
    from sklearn.base import clone
    est = FriedrichsSolver(preset="advection-winding", n=7, seed=1)
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_check_points_validation():
    with pytest.raises(ValueError):
        check_points(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        check_points(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        check_points(np.zeros((3, 2)), d=3)
    with pytest.raises(ValueError):
        check_points(np.zeros((2, 2, 2)))
    out = check_points([1.0, 2.0])
    assert out.shape == (2, 1) and out.dtype == np.float64


def test_unfitted_predict_raises():
    with pytest.raises(RuntimeError):
        FriedrichsSolver().predict(np.zeros((3, 2)))


def test_unknown_preset_rejected_at_fit():
    with pytest.raises(ValueError):
        FriedrichsSolver(preset="nope").fit()


def test_fit_predict_score_smoke():
    est = FriedrichsSolver(preset="advection-fan", n=6, N=64, N_b=32,
                           m_s=6, m_t=6, eta_s0=1e-3, eta_t0=1e-3,
                           eval_every=3, n_test_points=200, seed=2)
    out = est.fit()
    assert out is est
    assert est.n_iter_ >= 3
    assert len(est.history_) >= 1
    X = est.problem_.domain.sample_interior(50, np.random.default_rng(0))
    pred = est.predict(X)
    assert pred.shape == (50, 1)
    assert np.all(np.isfinite(pred))
    score = est.score()
    assert np.isfinite(score) and score <= 0.0
    # predict validates dimensions
    with pytest.raises(ValueError):
        est.predict(np.zeros((5, 3)))


def test_fit_respects_preset_overrides():
    est = FriedrichsSolver(preset="advection-fan", n=4, N=32, N_b=16, m_s=5,
                           m_t=5, eval_every=2, n_test_points=100, seed=0,
                           denominator_mode="sqrt-norm")
    est.fit()
    assert est.solution_.core.params.V.shape == (5, 2)
    assert est.status_ in ("budget-exhausted", "target-reached")
