"""First-order symmetric PDE systems ``T u = sum_k A_k d_k u + C u = f``.

A system carries its coefficient fields, the analytic divergence of the
``A_k`` family, data ``f``, and the coercivity constant.  The weak adjoint is
``Tt v = -sum_k A_k d_k v + (C^T - divA) v``; the boundary matrix
``sum_k n_k A_k`` classifies where solution data and test-function
constraints live.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "FriedrichsSystem",
    "CoercivityReport",
    "advection_system",
    "elliptic_canonical_system",
    "maxwell_system",
    "boundary_matrix",
    "adjoint_apply",
    "forward_apply",
    "coercivity_check",
    "coercive_shift",
    "shift_solution",
    "integration_by_parts_residual",
]


@dataclass
class FriedrichsSystem:
    """Coefficients and data of one first-order system.

    ``A_const``/``C_const``/``divA_const`` hold spatially constant
    coefficients; otherwise the callable fields are evaluated per batch.
    ``A(X)`` returns (N, d, r, r), ``C(X)`` and ``divA(X)`` return (N, r, r),
    ``f`` is a column closure with r outputs.  ``mu0`` is the claimed
    coercivity constant of ``C + C^T - divA >= 2 mu0 I``.
    """

    d: int
    r: int
    f: object
    mu0: float
    A_const: np.ndarray | None = None          # (d, r, r)
    C_const: np.ndarray | None = None          # (r, r)
    divA_const: np.ndarray | None = None       # (r, r)
    A_fn: object = None
    C_fn: object = None
    divA_fn: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.A_const is None) == (self.A_fn is None):
            raise ValueError("exactly one of A_const / A_fn required")
        if (self.C_const is None) == (self.C_fn is None):
            raise ValueError("exactly one of C_const / C_fn required")
        if self.A_const is not None:
            self.A_const = np.asarray(self.A_const, dtype=np.float64)
            if self.A_const.shape != (self.d, self.r, self.r):
                raise ValueError("A_const must be (d, r, r)")
        if self.C_const is not None:
            self.C_const = np.asarray(self.C_const, dtype=np.float64)
        if self.divA_const is None and self.divA_fn is None:
            self.divA_const = np.zeros((self.r, self.r))

    @property
    def constant_coefficients(self) -> bool:
        return self.A_const is not None and self.C_const is not None and self.divA_fn is None

    def A_at(self, X) -> np.ndarray:
        if self.A_const is not None:
            return np.broadcast_to(self.A_const, (X.shape[0],) + self.A_const.shape)
        return np.asarray(self.A_fn(X), dtype=np.float64)

    def C_at(self, X) -> np.ndarray:
        if self.C_const is not None:
            return np.broadcast_to(self.C_const, (X.shape[0], self.r, self.r))
        return np.asarray(self.C_fn(X), dtype=np.float64)

    def divA_at(self, X) -> np.ndarray:
        if self.divA_const is not None:
            return np.broadcast_to(self.divA_const, (X.shape[0], self.r, self.r))
        return np.asarray(self.divA_fn(X), dtype=np.float64)

    def f_at(self, X) -> np.ndarray:
        return ad.eval_columns(self.f, X)


# -- constructors -------------------------------------------------------------

def advection_system(d: int, beta, mu, f, mu0: float, div_beta=None) -> FriedrichsSystem:
    """Scalar transport ``mu u + beta . grad u = f`` as an r = 1 system.

    ``beta`` is a constant vector or a column closure returning d columns;
    ``mu`` a constant or column closure; ``div_beta`` the analytic divergence
    (defaults to 0 for constant beta, required otherwise unless zero).
    """
    meta = {"kind": "advection", "beta": beta, "mu": mu, "div_beta": div_beta}
    if callable(beta):
        def A_fn(X, beta=beta):
            cols = ad.eval_columns(beta, X)
            return cols.reshape(X.shape[0], d, 1, 1)

        div_const = None
        if div_beta is None:
            div_const = np.zeros((1, 1))

        def divA_fn(X, db=div_beta):
            return ad.eval_columns(db, X).reshape(X.shape[0], 1, 1)

        c_kwargs = {}
        if callable(mu):
            c_kwargs["C_fn"] = lambda X: ad.eval_columns(mu, X).reshape(X.shape[0], 1, 1)
        else:
            c_kwargs["C_const"] = np.array([[float(mu)]])
        return FriedrichsSystem(
            d=d, r=1, f=f, mu0=mu0, A_fn=A_fn,
            divA_const=div_const, divA_fn=None if div_beta is None else divA_fn,
            meta=meta, **c_kwargs)
    beta = np.asarray(beta, dtype=np.float64)
    A = beta.reshape(d, 1, 1)
    div_val = 0.0 if div_beta is None else float(div_beta)
    return FriedrichsSystem(
        d=d, r=1, f=f, mu0=mu0, A_const=A,
        C_const=np.array([[float(mu)]]),
        divA_const=np.array([[div_val]]), meta=meta)


def elliptic_canonical_system(d: int, mu: float, f_scalar, mu0: float) -> FriedrichsSystem:
    """First-order form of ``-laplace u + mu u = f`` with variables (v, u),
    ``v + grad u = 0`` and ``mu u + div v = f``; r = d + 1."""
    r = d + 1
    A = np.zeros((d, r, r))
    for k in range(d):
        A[k, k, d] = 1.0
        A[k, d, k] = 1.0

    C = np.zeros((r, r))
    C[:d, :d] = np.eye(d)
    C[d, d] = mu

    def f_vec(cols, f_scalar=f_scalar):
        zero = cols[0] * 0.0
        out = [zero for _ in range(d)]
        fs = f_scalar(cols)
        out.append(fs if not isinstance(fs, (list, tuple)) else fs[0])
        return out

    return FriedrichsSystem(d=d, r=r, f=f_vec, mu0=mu0, A_const=A, C_const=C,
                            meta={"kind": "elliptic-canonical", "mu": mu})


def maxwell_system(mu: float, sigma: float, f_closure, mu0: float) -> FriedrichsSystem:
    """Diffusive-regime Maxwell pair ``mu H + curl E = f1``,
    ``sigma E - curl H = f2`` with state (H, E); r = 6, d = 3."""
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    A = np.zeros((3, 6, 6))
    for k in range(3):
        R = eps[:, k, :]          # (curl E)_i = sum_k eps_{i k m} d_k E_m
        A[k, :3, 3:] = R
        A[k, 3:, :3] = R.T
    C = np.zeros((6, 6))
    C[:3, :3] = mu * np.eye(3)
    C[3:, 3:] = sigma * np.eye(3)
    return FriedrichsSystem(d=3, r=6, f=f_closure, mu0=mu0, A_const=A, C_const=C,
                            meta={"kind": "maxwell", "mu": mu, "sigma": sigma})


# -- operators ----------------------------------------------------------------

def boundary_matrix(sys: FriedrichsSystem, X: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """``sum_k n_k A_k`` at boundary points; requires unit normals."""
    normals = np.asarray(normals, dtype=np.float64)
    norms = np.linalg.norm(normals, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-8):
        raise ValueError("normals must be unit length")
    A = sys.A_at(X)  # (N, d, r, r)
    return np.einsum("nk,nkij->nij", normals, A)


def _directional_terms(sys, X, jac_stacked, n):
    """sum_k A_k J_k from a direction-stacked jacobian (d*N, r)."""
    if sys.constant_coefficients:
        total = None
        for k in range(sys.d):
            Jk = jac_stacked[k * n:(k + 1) * n] if not isinstance(jac_stacked, Tensor) \
                else ad.rows(jac_stacked, k * n, (k + 1) * n)
            term = Jk @ sys.A_const[k].T
            total = term if total is None else total + term
        return total
    A = sys.A_at(X)  # (N, d, r, r)
    total = None
    for k in range(sys.d):
        Jk = jac_stacked[k * n:(k + 1) * n] if not isinstance(jac_stacked, Tensor) \
            else ad.rows(jac_stacked, k * n, (k + 1) * n)
        Mk = np.ascontiguousarray(A[:, k])
        term = ad.batch_matvec(Mk, Jk) if isinstance(Jk, Tensor) \
            else np.einsum("nij,nj->ni", Mk, Jk)
        total = term if total is None else total + term
    return total


def _zeroth_term(sys, X, values, adjoint: bool):
    """(C u) or ((C^T - divA) u) for array or tensor values."""
    if sys.constant_coefficients:
        M = (sys.C_const.T - sys.divA_at(X)[0]) if adjoint else sys.C_const
        return values @ M.T
    C = sys.C_at(X)
    M = np.transpose(C, (0, 2, 1)) - sys.divA_at(X) if adjoint else C
    if isinstance(values, Tensor):
        return ad.batch_matvec(np.ascontiguousarray(M), values)
    return np.einsum("nij,nj->ni", M, values)


def adjoint_apply(sys: FriedrichsSystem, values, jac_stacked, X: np.ndarray):
    """Weak adjoint ``-sum_k A_k d_k v + (C^T - divA) v`` on a batch.

    ``values`` is (N, r), ``jac_stacked`` the direction-stacked jacobian
    (d*N, r); both may be tensors, in which case the result stays on the
    tape and is differentiable with respect to network parameters.
    """
    n = X.shape[0]
    return _zeroth_term(sys, X, values, adjoint=True) - _directional_terms(sys, X, jac_stacked, n)


def forward_apply(sys: FriedrichsSystem, values, jac_stacked, X: np.ndarray):
    """Strong operator ``sum_k A_k d_k u + C u`` on a batch."""
    n = X.shape[0]
    return _zeroth_term(sys, X, values, adjoint=False) + _directional_terms(sys, X, jac_stacked, n)


def adjoint_apply_field(sys, field_obj, X, params=None):
    """Adjoint applied to a network/closure field -> (values, Tt values)."""
    v, J = field_obj.jacobian(X, params) if params is not None else field_obj.jacobian(X)
    return v, adjoint_apply(sys, v, J, X)


def forward_apply_field(sys, field_obj, X, params=None):
    v, J = field_obj.jacobian(X, params) if params is not None else field_obj.jacobian(X)
    return v, forward_apply(sys, v, J, X)


@dataclass
class CoercivityReport:
    mu0_empirical: float
    ok: bool
    n_points: int


def coercivity_check(sys: FriedrichsSystem, X: np.ndarray) -> CoercivityReport:
    """Smallest eigenvalue of ``(C + C^T - divA) / 2`` over sample points."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 1:
        raise ValueError("need at least one sample point")
    C = sys.C_at(X)
    M = 0.5 * (C + np.transpose(C, (0, 2, 1)) - sys.divA_at(X))
    eigs = np.linalg.eigvalsh(M)
    mu0 = float(eigs[:, 0].min())
    return CoercivityReport(mu0_empirical=mu0, ok=mu0 > 0.0, n_points=X.shape[0])


def symmetry_defect(sys: FriedrichsSystem, X: np.ndarray) -> float:
    """max |A_k - A_k^T| over the batch; zero for admissible systems."""
    A = sys.A_at(X)
    return float(np.abs(A - np.transpose(A, (0, 1, 3, 2))).max())


def coercive_shift(sys: FriedrichsSystem, c: float) -> FriedrichsSystem:
    """Change of variables ``v = exp(-c t) u`` for scalar transport systems
    whose coordinate 0 is time with unit speed: the reaction coefficient
    gains ``+c`` and the data picks up the factor ``exp(-c t)``.

    ``c = 0`` is the identity transform; negative ``c`` is rejected.
    """
    if c < 0:
        raise ValueError("shift rate c must be >= 0")
    if sys.meta.get("kind") != "advection":
        raise ValueError("coercive shift implemented for scalar transport systems")
    if c == 0:
        return sys
    beta = sys.meta["beta"]
    if not callable(beta) and not np.isclose(np.asarray(beta)[0], 1.0):
        raise ValueError("coordinate 0 must be time with unit speed")
    mu = sys.meta["mu"]
    if callable(mu):
        new_mu = lambda cols, mu=mu, c=c: mu(cols) + c
    else:
        new_mu = float(mu) + c

    old_f = sys.f

    def new_f(cols, c=c, old_f=old_f):
        factor = np.exp(-c * cols[0])
        out = old_f(cols)
        if isinstance(out, (list, tuple)):
            return [factor * o for o in out]
        return factor * out

    return advection_system(sys.d, beta, new_mu, new_f, mu0=sys.mu0 + c,
                            div_beta=sys.meta.get("div_beta"))


def shift_solution(u_closure, c: float):
    """Exact-solution transform matching :func:`coercive_shift`."""
    def v_closure(cols, u=u_closure, c=c):
        factor = np.exp(-c * cols[0])
        out = u(cols)
        if isinstance(out, (list, tuple)):
            return [factor * o for o in out]
        return factor * out

    return v_closure


def integration_by_parts_residual(sys, u_closure, v_closure,
                                  interior_quad, boundary_quad) -> float:
    """| (Tu, v) - (u, Tt v) - boundary integral of v^T B u | under quadrature.

    ``interior_quad`` is (points, weights); ``boundary_quad`` is
    (points, normals, weights).
    """
    Xq, wq = interior_quad
    uv, ug = ad.value_and_grad(u_closure, Xq)
    vv, vg = ad.value_and_grad(v_closure, Xq)
    n = Xq.shape[0]

    def stack(g):
        return np.ascontiguousarray(np.moveaxis(g, 2, 0).reshape(-1, g.shape[1]))

    Tu = forward_apply(sys, uv, stack(ug), Xq)
    Ttv = adjoint_apply(sys, vv, stack(vg), Xq)
    interior = np.sum(wq * np.sum(Tu * vv, axis=1)) - np.sum(wq * np.sum(uv * Ttv, axis=1))

    Xb, nb, wb = boundary_quad
    B = boundary_matrix(sys, Xb, nb)
    ub = ad.eval_columns(u_closure, Xb)
    vb = ad.eval_columns(v_closure, Xb)
    flux = np.sum(wb * np.einsum("ni,nij,nj->n", vb, B, ub))
    return float(abs(interior - flux))
