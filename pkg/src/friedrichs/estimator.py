"""Estimator-style front end: configure, fit, predict.

``FriedrichsSolver`` follows the scikit-learn protocol (constructor stores
hyperparameters verbatim, ``fit`` trains and sets trailing-underscore
attributes, ``get_params``/``set_params`` expose the configuration) so the
solver composes with that ecosystem's tooling without importing it.
"""

from __future__ import annotations

import inspect

import numpy as np

from .losses import LossConfig
from .problems import PRESET_NAMES, exact_error_probe, preset
from .training import TrainConfig, train

__all__ = ["FriedrichsSolver", "check_points"]


def check_points(X, d: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a 2-d float64 point batch: finite entries, fixed width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-d (n_samples, n_dims), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    if d is not None and X.shape[1] != d:
        raise ValueError(f"{name} must have {d} columns, got {X.shape[1]}")
    return X


class FriedrichsSolver:
    """Mesh-free weak-form solver with an estimator interface.

    Parameters mirror the training-loop keys; ``None`` keeps each preset's
    table default.  ``fit`` runs the adversarial loop; ``predict`` evaluates
    the trained solution network at points; ``score`` returns the negative
    relative L2 error against the preset's exact solution.
    """

    def __init__(self, preset: str = "advection-fan", *, n: int | None = None,
                 n_s: int | None = None, n_t: int | None = None,
                 N: int | None = None, N_b: int | None = None,
                 eta_s0: float | None = None, eta_t0: float | None = None,
                 nu_s: float | None = None, nu_t: float | None = None,
                 theta_s: tuple | None = None, theta_t=None,
                 m_s=None, m_t: int | None = None,
                 denominator_mode: str | None = None,
                 volume_weighting: str | None = None,
                 seed: int = 0, eval_every: int | None = None,
                 n_test_points: int | None = None,
                 target_e_l2: float | None = None,
                 plateau_window: int | None = None,
                 max_seconds: float | None = None):
        self.preset = preset
        self.n = n
        self.n_s = n_s
        self.n_t = n_t
        self.N = N
        self.N_b = N_b
        self.eta_s0 = eta_s0
        self.eta_t0 = eta_t0
        self.nu_s = nu_s
        self.nu_t = nu_t
        self.theta_s = theta_s
        self.theta_t = theta_t
        self.m_s = m_s
        self.m_t = m_t
        self.denominator_mode = denominator_mode
        self.volume_weighting = volume_weighting
        self.seed = seed
        self.eval_every = eval_every
        self.n_test_points = n_test_points
        self.target_e_l2 = target_e_l2
        self.plateau_window = plateau_window
        self.max_seconds = max_seconds

    # -- scikit-learn protocol ------------------------------------------------
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "FriedrichsSolver":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for FriedrichsSolver")
            setattr(self, key, value)
        return self

    # -- configuration assembly -------------------------------------------
    def _resolved(self):
        if self.preset not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESET_NAMES}")
        prob = preset(self.preset)
        tc = prob.train_defaults
        overrides = {}
        for key in ("n", "n_s", "n_t", "N", "N_b", "eta_s0", "eta_t0", "nu_s",
                    "nu_t", "theta_s", "theta_t", "m_s", "m_t", "eval_every",
                    "n_test_points", "target_e_l2", "plateau_window",
                    "max_seconds"):
            value = getattr(self, key)
            if value is not None:
                overrides[key] = value
        overrides["seed"] = self.seed
        fields = {f: getattr(tc, f) for f in tc.__dataclass_fields__}
        fields.update(overrides)
        train_cfg = TrainConfig(**fields)

        lc = prob.loss_defaults
        loss_fields = {f: getattr(lc, f) for f in lc.__dataclass_fields__}
        if self.denominator_mode is not None:
            loss_fields["denominator_mode"] = self.denominator_mode
        if self.volume_weighting is not None:
            loss_fields["volume_weighting"] = self.volume_weighting
        loss_cfg = LossConfig(**loss_fields)
        return prob, train_cfg, loss_cfg

    # -- estimator API ------------------------------------------------------
    def fit(self, X=None, y=None) -> "FriedrichsSolver":
        """Train the solution and test networks; samples its own points.

        ``X`` and ``y`` are accepted for pipeline compatibility and ignored:
        the problem geometry and data come from the preset.
        """
        prob, train_cfg, loss_cfg = self._resolved()
        result = train(prob, train_cfg, loss_cfg)
        self.problem_ = prob
        self.solution_ = result.solution
        self.test_net_ = result.test
        self.history_ = result.history
        self.status_ = result.status
        self.n_iter_ = result.history[-1].iteration if result.history else 0
        self.error_l2_ = result.best_e_l2
        return self

    def _require_fitted(self):
        if not hasattr(self, "solution_"):
            raise RuntimeError("this solver is not fitted; call fit() first")

    def predict(self, X) -> np.ndarray:
        """Evaluate the trained solution field at points (n, d)."""
        self._require_fitted()
        X = check_points(X, d=self.problem_.domain.d)
        return self.solution_.values(X)

    def score(self, X=None, y=None) -> float:
        """Negative relative L2 error against the preset's exact solution,
        at the given points or on the preset's probe set (higher is better,
        0 is exact)."""
        self._require_fitted()
        if X is not None:
            from .metrics import relative_errors
            X = check_points(X, d=self.problem_.domain.d)
            report = relative_errors(self.solution_, self.problem_.exact, X,
                                     linf_valid=self.problem_.continuous)
        else:
            report = exact_error_probe(self.problem_, self.solution_)
        return -report.e_l2
