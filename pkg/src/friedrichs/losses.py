"""Minimax objectives for weak-form training, plus reference losses.

The core empirical objective is a ratio: the numerator couples the solution
field against the weak adjoint of the test field (with the boundary pairing
through the boundary matrix); the denominator normalizes by the strength of
the adjoint so the adversary cannot win by inflating the test function.  At
a weak solution the numerator vanishes for every admissible test function.

Two conventions are kept side by side: the plain per-sample averages used in
training, and a measure-weighted variant whose value converges to the
continuous functional (used by oracles).  The denominator is either the mean
of squared adjoint norms (training default) or the square root of the
weighted mean (the continuous norm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .sampling import SampleBatch
from .systems import FriedrichsSystem, adjoint_apply, boundary_matrix, forward_apply

__all__ = [
    "LossConfig",
    "DegenerateTestFunctionError",
    "NonFiniteLossError",
    "empirical_loss",
    "empirical_loss_value",
    "empirical_loss_grads",
    "boundary_penalty",
    "elliptic_primal_loss",
    "elliptic_primal_loss_grads",
    "strong_form_ls_loss",
    "strong_form_ls_loss_grads",
    "minimax_loss_continuous",
    "EllipticPrimalData",
]

_DEGENERATE_FLOOR = 1e-14


class DegenerateTestFunctionError(RuntimeError):
    """The adjoint of the test function is numerically zero on the batch."""


class NonFiniteLossError(RuntimeError):
    """A loss or gradient stopped being finite."""


@dataclass
class LossConfig:
    denominator_mode: str = "paper-squared"      # or "sqrt-norm"
    volume_weighting: str = "paper-averages"     # or "measure-weighted"
    lambda1: float = 1.0
    lambda2: float = 1.0
    boundary_handling: str = "hard-encoded"      # or "penalty"
    penalty_form: str = "squared"                # or "log"

    def __post_init__(self):
        if self.denominator_mode not in ("paper-squared", "sqrt-norm"):
            raise ValueError(f"bad denominator_mode {self.denominator_mode!r}")
        if self.volume_weighting not in ("paper-averages", "measure-weighted"):
            raise ValueError(f"bad volume_weighting {self.volume_weighting!r}")
        if self.boundary_handling not in ("hard-encoded", "penalty"):
            raise ValueError(f"bad boundary_handling {self.boundary_handling!r}")
        if self.penalty_form not in ("squared", "log"):
            raise ValueError(f"bad penalty_form {self.penalty_form!r}")
        if not (np.isfinite(self.lambda1) and np.isfinite(self.lambda2)):
            raise ValueError("penalty weights must be finite")


def _weights(cfg: LossConfig, batch: SampleBatch):
    """(interior factor, boundary factor) applied to the plain averages."""
    if cfg.volume_weighting == "measure-weighted":
        return (batch.volume_weight * batch.n_interior,
                batch.surface_weight * batch.n_boundary)
    return 1.0, 1.0


def _dot_rows(a, b):
    return (a * b).sum(axis=1) if isinstance(a, Tensor) or isinstance(b, Tensor) \
        else np.sum(a * b, axis=1)


def _mean(x):
    return x.mean() if isinstance(x, Tensor) else float(np.mean(x))


def _value(x) -> float:
    return float(x.data) if isinstance(x, Tensor) else float(x)


def empirical_loss(sol, test, sys: FriedrichsSystem, batch: SampleBatch,
                   cfg: LossConfig, pt_s=None, pt_t=None, classification=None):
    """Monte Carlo minimax objective |numerator| / denominator (+ penalty).

    ``sol`` and ``test`` are field objects (networks or closures); passing
    tensor parameter dicts ``pt_s`` / ``pt_t`` makes the result
    differentiable with respect to that side.
    """
    X1 = batch.interior
    w_in, w_bd = _weights(cfg, batch)

    v_val, v_jac = test.jacobian(X1, pt_t)
    Ttv = adjoint_apply(sys, v_val, v_jac, X1)
    u_val = sol.values(X1, pt_s)

    numerator = _mean(_dot_rows(u_val, Ttv)) * w_in
    f_vals = sys.f_at(X1)
    numerator = numerator - _mean(_dot_rows(f_vals, v_val)) * w_in

    if batch.n_boundary > 0:
        X2 = batch.boundary
        B = boundary_matrix(sys, X2, batch.normals)
        u_bd = sol.values(X2, pt_s)
        v_bd = test.values(X2, pt_t)
        Bu = ad.batch_matvec(B, u_bd) if isinstance(u_bd, Tensor) \
            else np.einsum("nij,nj->ni", B, u_bd)
        numerator = numerator + _mean(_dot_rows(Bu, v_bd)) * w_bd

    sq = _mean(_dot_rows(Ttv, Ttv))
    if _value(sq) < _DEGENERATE_FLOOR:
        raise DegenerateTestFunctionError(
            f"adjoint of test function has squared norm {_value(sq):.3e} on the batch")
    if cfg.denominator_mode == "sqrt-norm":
        denominator = (sq * w_in).sqrt() if isinstance(sq, Tensor) else np.sqrt(sq * w_in)
    else:
        denominator = sq

    num_abs = numerator.abs() if isinstance(numerator, Tensor) else abs(numerator)
    loss = num_abs / denominator
    if cfg.boundary_handling == "penalty":
        loss = loss + boundary_penalty(sol, test, batch, cfg, classification,
                                       pt_s=pt_s, pt_t=pt_t)
    return loss


def empirical_loss_value(sol, test, sys, batch, cfg, classification=None) -> float:
    return _value(empirical_loss(sol, test, sys, batch, cfg,
                                 classification=classification))


def _grads_of(builder, sol, test, wrt: str):
    """Common tape plumbing for all loss gradients."""
    with Tape() as tape:
        pt_s = sol.tensor_params() if wrt in ("s", "both") else None
        pt_t = test.tensor_params() if test is not None and wrt in ("t", "both") else None
        loss = builder(pt_s, pt_t)
        params = {}
        if pt_s:
            params.update({("s", k): v for k, v in pt_s.items()})
        if pt_t:
            params.update({("t", k): v for k, v in pt_t.items()})
        grads = tape.gradients(params, root=loss)
    value = _value(loss)
    if not np.isfinite(value):
        raise NonFiniteLossError(f"loss is {value}")
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            side, name = key
            raise NonFiniteLossError(
                f"gradient wrt {side}:{name} contains non-finite entries "
                f"(max |g| finite part {np.nanmax(np.abs(g[np.isfinite(g)])) if np.any(np.isfinite(g)) else 0.0:.3e})")
    gs = {k[1]: v for k, v in grads.items() if k[0] == "s"}
    gt = {k[1]: v for k, v in grads.items() if k[0] == "t"}
    return value, gs, gt


def empirical_loss_grads(sol, test, sys, batch, cfg, wrt: str,
                         classification=None):
    """(value, grads wrt solution params, grads wrt test params)."""
    return _grads_of(
        lambda pt_s, pt_t: empirical_loss(sol, test, sys, batch, cfg,
                                          pt_s=pt_s, pt_t=pt_t,
                                          classification=classification),
        sol, test, wrt)


# ---------------------------------------------------------------------------
# boundary penalty (used when constraints are not encoded)
# ---------------------------------------------------------------------------

def _masked_mean_sq(values, mask):
    if mask is not None and mask.sum() == 0:
        return 0.0
    if isinstance(values, Tensor):
        if mask is None:
            return (values * values).sum(axis=1).mean()
        sel = values * mask[:, None]
        return (sel * sel).sum() * (1.0 / mask.sum())
    if mask is not None:
        values = values[mask]
    return float(np.mean(np.sum(values * values, axis=1)))


def boundary_penalty(sol, test, batch: SampleBatch, cfg: LossConfig,
                     classification=None, pt_s=None, pt_t=None):
    """Penalty on boundary-condition violation of both fields.

    Squared form: lambda1 * mean |phi_s - g_d|^2 - lambda2 * mean |phi_t|^2,
    each over its own constrained piece set.  Log form applies
    log(clamp(dist^2)) to each term instead.
    """
    if batch.n_boundary == 0:
        return 0.0
    X2 = batch.boundary
    sol_mask = test_mask = None
    g_vals = None
    if classification is not None:
        sol_mask = classification.solution_mask(batch)
        test_mask = classification.test_mask(batch)
        if classification.g_d is not None:
            g_vals = ad.eval_columns(classification.g_d, X2)
    if g_vals is None:
        g_vals = 0.0

    u_bd = sol.values(X2, pt_s)
    mism_s = u_bd - g_vals
    dist_s = _masked_mean_sq(mism_s, sol_mask)

    dist_t = 0.0
    if test is not None:
        v_bd = test.values(X2, pt_t)
        dist_t = _masked_mean_sq(v_bd, test_mask)

    if cfg.penalty_form == "log":
        def safe_log(x):
            if isinstance(x, Tensor):
                return (x + _clamp_gap(x)).log()
            return np.log(max(x, 1e-30))

        return cfg.lambda1 * safe_log(dist_s) - cfg.lambda2 * safe_log(dist_t)
    return cfg.lambda1 * dist_s - cfg.lambda2 * dist_t


def _clamp_gap(x: Tensor) -> float:
    # raises tiny distances to the 1e-30 floor before the log
    return max(0.0, 1e-30 - float(x.data))


# ---------------------------------------------------------------------------
# primal second-order objective for scalar diffusion problems
# ---------------------------------------------------------------------------

@dataclass
class EllipticPrimalData:
    """Data of ``-div(a grad u) + mu u = f`` with Dirichlet trace g."""

    a: object              # column closure, scalar diffusion coefficient
    f: object
    g: object              # boundary data (used in the flux correction)
    mu: float = 0.0

    def a_and_grad(self, X):
        v, g, _ = ad.value_grad_diag2(self.a, X)
        return v[:, 0], g[:, 0, :]


def elliptic_primal_loss(sol, test, data: EllipticPrimalData, batch: SampleBatch,
                         cfg: LossConfig, pt_s=None, pt_t=None):
    """|(u, A* psi) - (f, psi) + boundary flux| / ||A* psi|| with
    ``A* psi = -div(a grad psi) + mu psi`` for a test field vanishing on the
    boundary.

    The flux term ``mean(g a dpsi/dn)`` restores exactness for inhomogeneous
    Dirichlet data; it vanishes when g = 0.
    """
    X1 = batch.interior
    n1, d = X1.shape
    w_in, w_bd = _weights(cfg, batch)

    psi, Jpsi, Spsi = test.jet(X1, pt_t)
    a_vals, a_grad = data.a_and_grad(X1)

    lap = ad.sum_row_blocks(Spsi, d) if isinstance(Spsi, Tensor) \
        else Spsi.reshape(d, n1, -1).sum(axis=0)
    ag_stack = np.ascontiguousarray(a_grad.T.reshape(d * n1, 1))
    prod = ag_stack * Jpsi
    grad_dot = ad.sum_row_blocks(prod, d) if isinstance(prod, Tensor) \
        else prod.reshape(d, n1, -1).sum(axis=0)
    Astar = data.mu * psi - a_vals[:, None] * lap - grad_dot

    u_val = sol.values(X1, pt_s)
    f_vals = ad.eval_columns(data.f, X1)

    numerator = (_mean(_dot_rows(u_val, Astar)) - _mean(_dot_rows(f_vals, psi))) * w_in

    if batch.n_boundary > 0 and data.g is not None:
        X2 = batch.boundary
        n2 = X2.shape[0]
        _, Jb = test.jacobian(X2, pt_t)
        nb_stack = np.ascontiguousarray(batch.normals.T.reshape(d * n2, 1))
        dn = nb_stack * Jb
        dn = ad.sum_row_blocks(dn, d) if isinstance(dn, Tensor) \
            else dn.reshape(d, n2, -1).sum(axis=0)
        g_vals = ad.eval_columns(data.g, X2)
        ab = ad.eval_columns(data.a, X2)[:, 0]
        flux = _mean(_dot_rows(g_vals * ab[:, None], dn)) * w_bd
        numerator = numerator + flux

    sq = _mean(_dot_rows(Astar, Astar))
    if _value(sq) < _DEGENERATE_FLOOR:
        raise DegenerateTestFunctionError("second-order adjoint vanished on batch")
    if cfg.denominator_mode == "sqrt-norm":
        denominator = (sq * w_in).sqrt() if isinstance(sq, Tensor) else np.sqrt(sq * w_in)
    else:
        denominator = sq

    num_abs = numerator.abs() if isinstance(numerator, Tensor) else abs(numerator)
    return num_abs / denominator


def elliptic_primal_loss_grads(sol, test, data, batch, cfg, wrt: str):
    return _grads_of(
        lambda pt_s, pt_t: elliptic_primal_loss(sol, test, data, batch, cfg,
                                                pt_s=pt_s, pt_t=pt_t),
        sol, test, wrt)


# ---------------------------------------------------------------------------
# strong-form least squares (comparison baseline)
# ---------------------------------------------------------------------------

def strong_form_ls_loss(sol, sys: FriedrichsSystem, batch: SampleBatch,
                        g_d=None, boundary_weight: float = 1.0, pt_s=None,
                        sol_mask=None):
    """mean |T phi - f|^2 plus a weighted boundary mismatch penalty."""
    X1 = batch.interior
    u_val, u_jac = sol.jacobian(X1, pt_s)
    Tu = forward_apply(sys, u_val, u_jac, X1)
    res = Tu - sys.f_at(X1)
    loss = _mean(_dot_rows(res, res))
    if batch.n_boundary > 0 and g_d is not None:
        X2 = batch.boundary
        mask = sol_mask if sol_mask is not None else np.ones(X2.shape[0], dtype=bool)
        if mask.sum() > 0:
            u_bd = sol.values(X2, pt_s)
            mism = u_bd - ad.eval_columns(g_d, X2)
            loss = loss + boundary_weight * _masked_mean_sq(mism, mask)
    return loss


def strong_form_ls_loss_grads(sol, sys, batch, g_d=None, boundary_weight=1.0,
                              sol_mask=None):
    value, gs, _ = _grads_of(
        lambda pt_s, pt_t: strong_form_ls_loss(sol, sys, batch, g_d=g_d,
                                               boundary_weight=boundary_weight,
                                               pt_s=pt_s, sol_mask=sol_mask),
        sol, None, "s")
    return value, gs


# ---------------------------------------------------------------------------
# continuous functional under quadrature (oracle, not used in training)
# ---------------------------------------------------------------------------

def minimax_loss_continuous(u_closure, v_closure, sys: FriedrichsSystem,
                            quadrature) -> float:
    """|(u, Tt v) - (f, v)| / ||Tt v|| under a high-order quadrature rule."""
    Xq, wq = quadrature
    vv, vg = ad.value_and_grad(v_closure, Xq)
    n = Xq.shape[0]
    vg_stack = np.ascontiguousarray(np.moveaxis(vg, 2, 0).reshape(-1, vg.shape[1]))
    Ttv = adjoint_apply(sys, vv, vg_stack, Xq)
    uu = ad.eval_columns(u_closure, Xq)
    ff = sys.f_at(Xq)
    num = abs(np.sum(wq * np.sum(uu * Ttv, axis=1)) - np.sum(wq * np.sum(ff * vv, axis=1)))
    den = np.sqrt(np.sum(wq * np.sum(Ttv * Ttv, axis=1)))
    if den <= _DEGENERATE_FLOOR:
        raise DegenerateTestFunctionError("test function has vanishing adjoint")
    return float(num / den)
