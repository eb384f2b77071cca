"""Error metrics and the independent verification oracles."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .systems import FriedrichsSystem, adjoint_apply

__all__ = [
    "ErrorReport",
    "relative_errors",
    "errors_from_values",
    "dual_norm_residual",
    "minimax_gap_probe",
    "HISTORY_FIELDS",
    "write_history_csv",
    "read_history_csv",
]

HISTORY_FIELDS = ("iteration", "loss", "e_L2", "e_Linf", "lr_s", "lr_t", "wall_time_s")


@dataclass
class ErrorReport:
    """Relative discrete errors over a fixed probe set."""

    e_l2: float
    e_linf: float | None
    n_points: int
    seed: int | None = None


def errors_from_values(pred: np.ndarray, exact: np.ndarray,
                       linf_valid: bool = True, seed=None) -> ErrorReport:
    """e_L2 = sqrt(sum |pred - exact|^2 / sum |exact|^2);
    e_Linf = max |pred - exact|_inf / max |exact|_inf."""
    pred = np.asarray(pred, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if exact.ndim == 1:
        exact = exact[:, None]
    denom = np.sum(exact**2)
    if denom == 0.0:
        raise ValueError("exact solution vanishes on the probe set")
    e_l2 = float(np.sqrt(np.sum((pred - exact) ** 2) / denom))
    e_linf = None
    if linf_valid:
        e_linf = float(np.max(np.abs(pred - exact)) / np.max(np.abs(exact)))
    return ErrorReport(e_l2=e_l2, e_linf=e_linf, n_points=pred.shape[0], seed=seed)


def relative_errors(field, exact_closure, points: np.ndarray,
                    linf_valid: bool = True, seed=None) -> ErrorReport:
    if points.shape[0] < 1:
        raise ValueError("need at least one probe point")
    pred = field.values(points)
    exact = ad.eval_columns(exact_closure, points)
    return errors_from_values(pred, exact, linf_valid=linf_valid, seed=seed)


def _adjoint_of_closure(sys, closure, Xq):
    v, g = ad.value_and_grad(closure, Xq)
    stacked = np.ascontiguousarray(np.moveaxis(g, 2, 0).reshape(-1, g.shape[1]))
    return v, adjoint_apply(sys, v, stacked, Xq)


def dual_norm_residual(sys: FriedrichsSystem, u_closure, basis, quadrature,
                       rcond: float = 1e-12) -> float:
    """Exact maximum of |(u, Tt psi) - (f, psi)| / ||Tt psi|| over the span
    of a finite test basis: sqrt(r^T G^+ r) with r_j the residual pairings
    and G the Gram matrix of the adjoint images.

    Rank deficiency is handled by an eigenvalue pseudo-inverse with a
    relative cutoff, which also makes the value invariant under rescaling
    any basis function.
    """
    r, G = _residual_and_gram(sys, u_closure, basis, quadrature)
    # normalize to unit Gram diagonal so the spectral cutoff is insensitive
    # to per-function rescaling
    d = np.sqrt(np.maximum(np.diag(G), 0.0))
    keep = d > 1e-150
    scale = np.where(keep, d, 1.0)
    Gn = (G / scale[:, None]) / scale[None, :]
    rn = np.where(keep, r / scale, 0.0)
    Gn = Gn[np.ix_(keep, keep)]
    rn = rn[keep]
    if rn.size == 0:
        return 0.0
    evals, evecs = np.linalg.eigh(Gn)
    cutoff = rcond * max(evals.max(), 0.0)
    inv = np.where(evals > cutoff, 1.0 / np.maximum(evals, 1e-300), 0.0)
    proj = evecs.T @ rn
    return float(np.sqrt(np.sum(inv * proj * proj)))


def _residual_and_gram(sys, u_closure, basis, quadrature):
    Xq, wq = quadrature
    uu = ad.eval_columns(u_closure, Xq)
    ff = sys.f_at(Xq)
    k = len(basis)
    r = np.empty(k)
    images = []
    for j, psi in enumerate(basis):
        pv, Tt = _adjoint_of_closure(sys, psi, Xq)
        images.append(Tt)
        r[j] = np.sum(wq * np.sum(uu * Tt, axis=1)) - np.sum(wq * np.sum(ff * pv, axis=1))
    G = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            G[i, j] = G[j, i] = np.sum(wq * np.sum(images[i] * images[j], axis=1))
    return r, G


def random_search_dual_norm(sys, u_closure, basis, quadrature, n_dirs: int,
                            rng) -> float:
    """Lower bound of the dual norm by random coefficient directions (the
    independent check of the closed form).  Directions are drawn in the
    norm-equilibrated coordinates for even coverage."""
    r, G = _residual_and_gram(sys, u_closure, basis, quadrature)
    d = np.sqrt(np.maximum(np.diag(G), 1e-300))
    C = rng.normal(size=(n_dirs, len(basis))) / d[None, :]
    num = np.abs(C @ r)
    den = np.sqrt(np.maximum(np.einsum("nk,kl,nl->n", C, G, C), 0.0))
    ok = den > 1e-14
    return float(np.max(num[ok] / den[ok]))


def minimax_gap_probe(sys, u_field, basis, quadrature, test_field=None,
                      test_closure=None) -> dict:
    """Diagnostic comparing an adversary's achieved ratio with the exact
    maximum over a fixed test basis.

    The ordering claim (achieved <= dual norm) only holds when the test
    function lies in the basis span; otherwise both values are reported
    without ordering.
    """
    u_closure = u_field.as_closure() if hasattr(u_field, "as_closure") else u_field
    dual = dual_norm_residual(sys, u_closure, basis, quadrature)
    out = {"dual_norm": dual, "achieved_ratio": None, "in_span": test_closure is not None}
    closure = None
    if test_closure is not None:
        closure = test_closure
    elif test_field is not None:
        closure = test_field.as_closure()
    if closure is not None:
        from .losses import minimax_loss_continuous
        out["achieved_ratio"] = minimax_loss_continuous(u_closure, closure, sys,
                                                        quadrature)
    return out


def write_history_csv(path: str, entries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for e in entries:
            writer.writerow([
                e.iteration,
                repr(e.loss),
                repr(e.e_l2),
                "" if e.e_linf is None else repr(e.e_linf),
                repr(e.lr_s),
                repr(e.lr_t),
                f"{e.wall_time_s:.3f}",
            ])


def read_history_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader)
