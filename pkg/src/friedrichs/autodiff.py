"""Dense float64 array arithmetic with two composable differentiation modes.

Reverse mode (:class:`Tensor` + :class:`Tape`) differentiates a scalar loss
with respect to network parameters.  Forward mode (:class:`Jet`,
:func:`forward_dual`) differentiates batched closures with respect to their
input coordinates, carrying first derivatives and diagonal second
derivatives.  Forward-mode states built from ``Tensor`` operands are recorded
on the active tape, so parameter gradients of losses that contain input
derivatives of networks come out exact.

Everything is float64: downstream error targets (1e-3 .. 1e-2) leave no
budget for single-precision drift in the verification oracles.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "AutodiffError",
    "UnsupportedPrimitiveError",
    "NonScalarRootError",
    "Tape",
    "Tensor",
    "Jet",
    "DualBatch",
    "forward_dual",
    "backward",
    "coordinate_jets",
    "eval_columns",
    "value_and_grad",
    "value_grad_diag2",
    "where",
]


class AutodiffError(Exception):
    """Base class for differentiation failures."""


class UnsupportedPrimitiveError(AutodiffError):
    """A closure used a primitive the engine cannot differentiate."""

    def __init__(self, primitive: str):
        self.primitive = str(primitive)
        super().__init__(f"unsupported primitive: {self.primitive}")


class NonScalarRootError(AutodiffError):
    """Backward pass was started from a non-scalar value."""


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Reverse mode
# ---------------------------------------------------------------------------

_ACTIVE_TAPE = None


class Tape:
    """Execution-ordered record of operations.

    Recording order is a topological order, so the backward pass walks the
    records in reverse and :meth:`replay` re-executes them forward.  Replay
    recomputes every intermediate from the current leaf data and reproduces
    the recorded root bit-identically when the leaves are unchanged.
    """

    def __init__(self):
        self._records = []  # (out, inputs, backward_fn, forward_fn)
        self._outer = None

    def __enter__(self):
        global _ACTIVE_TAPE
        self._outer = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._outer
        self._outer = None
        return False

    def __len__(self):
        return len(self._records)

    def record(self, out, inputs, backward_fn, forward_fn):
        self._records.append((out, inputs, backward_fn, forward_fn))

    @property
    def root(self) -> "Tensor":
        if not self._records:
            raise AutodiffError("empty tape has no root")
        return self._records[-1][0]

    def replay(self) -> np.ndarray:
        """Re-execute all recorded ops forward; returns the root value."""
        for out, _, _, forward_fn in self._records:
            forward_fn()
        return self.root.data.copy()

    def backward(self, root: "Tensor" | None = None, seed: float = 1.0) -> None:
        """Accumulate d(root)/d(leaf) into ``.grad`` of every tracked tensor."""
        root = self.root if root is None else root
        if root.data.size != 1:
            raise NonScalarRootError(
                f"backward root must be scalar, got shape {root.data.shape}"
            )
        for out, inputs, _, _ in self._records:
            out.grad = None
            for t in inputs:
                t.grad = None
        root.grad = np.full_like(root.data, float(seed))
        for out, _, backward_fn, _ in reversed(self._records):
            if out.grad is not None:
                backward_fn(out.grad)

    def gradients(self, params: dict, root: "Tensor" | None = None,
                  seed: float = 1.0) -> dict:
        """Backward pass returning ``{name: gradient array}`` for ``params``."""
        self.backward(root=root, seed=seed)
        out = {}
        for name, t in params.items():
            out[name] = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        return out


def backward(tape: Tape, seed: float = 1.0) -> None:
    """Run the backward pass of ``tape`` from its final (scalar) record."""
    tape.backward(seed=seed)


def _accumulate(t: "Tensor", g, own: bool = False) -> None:
    """Add ``g`` into ``t.grad``.

    ``own=True`` promises ``g`` is a fresh array (or a view of a gradient
    that is already fully consumed), so the first accumulation can adopt it
    without copying.  At most one input per op may receive ownership of the
    same buffer.
    """
    if not t.tracked:
        return
    if t.grad is None:
        if own and g.shape == t.data.shape:
            t.grad = g if g.base is None else g.copy()
        else:
            t.grad = np.array(g, dtype=np.float64)
            if t.grad.shape != t.data.shape:  # scalar-shaped seeds
                t.grad = np.broadcast_to(t.grad, t.data.shape).copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (adjoint of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    """Reverse-mode graph node over a float64 ndarray.

    Constants entering an expression are lifted automatically and carry no
    gradient.  Ops are recorded on the active :class:`Tape` only when at
    least one operand is tracked, so frozen networks evaluated with plain
    ndarrays cost nothing.
    """

    __slots__ = ("data", "grad", "tracked")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, data, tracked: bool = True):
        self.data = _as_f64(data)
        self.grad = None
        self.tracked = bool(tracked)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        return power(self, p)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis=axis)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def abs(self):
        return absolute(self)

    def sqrt(self):
        return sqrt(self)

    def log(self):
        return log(self)

    def exp(self):
        return exp(self)


def lift(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, tracked=False)


def _emit(out: Tensor, inputs: tuple, backward_fn, forward_fn) -> Tensor:
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.tracked for t in inputs):
        out.tracked = True
        tape.record(out, inputs, backward_fn, forward_fn)
    else:
        out.tracked = False
    return out


def add(a, b):
    a, b = lift(a), lift(b)
    out = Tensor(a.data + b.data, tracked=False)

    def forward_fn():
        out.data = a.data + b.data

    def backward_fn(g):
        if a.tracked:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.tracked:
            _accumulate(b, _unbroadcast(g, b.data.shape))


    return _emit(out, (a, b), backward_fn, forward_fn)


def sub(a, b):
    a, b = lift(a), lift(b)
    out = Tensor(a.data - b.data, tracked=False)

    def forward_fn():
        out.data = a.data - b.data

    def backward_fn(g):
        if a.tracked:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.tracked:
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _emit(out, (a, b), backward_fn, forward_fn)


def mul(a, b):
    a, b = lift(a), lift(b)
    out = Tensor(a.data * b.data, tracked=False)

    def forward_fn():
        out.data = a.data * b.data

    def backward_fn(g):
        if a.tracked:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape), own=True)
        if b.tracked:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape), own=True)

    return _emit(out, (a, b), backward_fn, forward_fn)


def div(a, b):
    a, b = lift(a), lift(b)
    out = Tensor(a.data / b.data, tracked=False)

    def forward_fn():
        out.data = a.data / b.data

    def backward_fn(g):
        if a.tracked:
            _accumulate(a, _unbroadcast(g / b.data, a.data.shape), own=True)
        if b.tracked:
            _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape), own=True)

    return _emit(out, (a, b), backward_fn, forward_fn)


def neg(a):
    a = lift(a)
    out = Tensor(-a.data, tracked=False)

    def forward_fn():
        out.data = -a.data

    def backward_fn(g):
        _accumulate(a, -g, own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def matmul(a, b):
    a, b = lift(a), lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise AutodiffError("matmul expects 2-d operands")
    out = Tensor(a.data @ b.data, tracked=False)

    def forward_fn():
        out.data = a.data @ b.data

    def backward_fn(g):
        if a.tracked:
            _accumulate(a, g @ b.data.T, own=True)
        if b.tracked:
            _accumulate(b, a.data.T @ g, own=True)

    return _emit(out, (a, b), backward_fn, forward_fn)


def transpose(a):
    a = lift(a)
    out = Tensor(a.data.T.copy(), tracked=False)

    def forward_fn():
        out.data = a.data.T.copy()

    def backward_fn(g):
        _accumulate(a, g.T)

    return _emit(out, (a,), backward_fn, forward_fn)


def power(a, p):
    a = lift(a)
    p = float(p)
    out = Tensor(a.data ** p, tracked=False)

    def forward_fn():
        out.data = a.data ** p

    def backward_fn(g):
        _accumulate(a, g * p * a.data ** (p - 1.0), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def tanh(a):
    a = lift(a)
    out = Tensor(np.tanh(a.data), tracked=False)

    def forward_fn():
        out.data = np.tanh(a.data)

    def backward_fn(g):
        _accumulate(a, g * (1.0 - out.data * out.data), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def relu(a):
    """max(0, x); the subgradient at exactly 0 is fixed to 0."""
    a = lift(a)
    out = Tensor(np.maximum(a.data, 0.0), tracked=False)

    def forward_fn():
        out.data = np.maximum(a.data, 0.0)

    def backward_fn(g):
        _accumulate(a, g * (a.data > 0.0), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def absolute(a):
    a = lift(a)
    out = Tensor(np.abs(a.data), tracked=False)

    def forward_fn():
        out.data = np.abs(a.data)

    def backward_fn(g):
        _accumulate(a, g * np.sign(a.data), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def sqrt(a):
    a = lift(a)
    out = Tensor(np.sqrt(a.data), tracked=False)

    def forward_fn():
        out.data = np.sqrt(a.data)

    def backward_fn(g):
        _accumulate(a, g * 0.5 / out.data, own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def log(a):
    a = lift(a)
    out = Tensor(np.log(a.data), tracked=False)

    def forward_fn():
        out.data = np.log(a.data)

    def backward_fn(g):
        _accumulate(a, g / a.data, own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def exp(a):
    a = lift(a)
    out = Tensor(np.exp(a.data), tracked=False)

    def forward_fn():
        out.data = np.exp(a.data)

    def backward_fn(g):
        _accumulate(a, g * out.data, own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def tsum(a, axis=None):
    a = lift(a)
    out = Tensor(a.data.sum(axis=axis), tracked=False)

    def forward_fn():
        out.data = a.data.sum(axis=axis)

    def backward_fn(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _emit(out, (a,), backward_fn, forward_fn)


def tmean(a, axis=None):
    a = lift(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis) * (1.0 / n)


def tile_rows(a, k: int):
    """Stack ``k`` copies of (N, m) along axis 0 -> (k*N, m)."""
    a = lift(a)
    k = int(k)
    out = Tensor(np.tile(a.data, (k, 1)), tracked=False)

    def forward_fn():
        out.data = np.tile(a.data, (k, 1))

    def backward_fn(g):
        n, m = a.data.shape
        _accumulate(a, g.reshape(k, n, m).sum(axis=0), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def sum_row_blocks(a, k: int):
    """Adjoint of :func:`tile_rows`: (k*N, m) -> sum of the k blocks (N, m)."""
    a = lift(a)
    k = int(k)
    kn, m = a.data.shape
    n = kn // k
    out = Tensor(a.data.reshape(k, n, m).sum(axis=0), tracked=False)

    def forward_fn():
        out.data = a.data.reshape(k, n, m).sum(axis=0)

    def backward_fn(g):
        _accumulate(a, np.tile(g, (k, 1)), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def repeat_rows(a, n: int):
    """Repeat each row of (k, m) ``n`` times -> (k*n, m), row-block ordered."""
    a = lift(a)
    n = int(n)
    out = Tensor(np.repeat(a.data, n, axis=0), tracked=False)

    def forward_fn():
        out.data = np.repeat(a.data, n, axis=0)

    def backward_fn(g):
        k, m = a.data.shape
        _accumulate(a, g.reshape(k, n, m).sum(axis=1), own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def rows(a, i0: int, i1: int):
    """Row slice [i0:i1] of a 2-d tensor."""
    a = lift(a)
    out = Tensor(a.data[i0:i1].copy(), tracked=False)

    def forward_fn():
        out.data = a.data[i0:i1].copy()

    def backward_fn(g):
        full = np.zeros_like(a.data)
        full[i0:i1] = g
        _accumulate(a, full, own=True)

    return _emit(out, (a,), backward_fn, forward_fn)


def concat_cols(parts):
    """Concatenate 2-d tensors along axis 1."""
    parts = [lift(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), tracked=False)

    def forward_fn():
        out.data = np.concatenate([p.data for p in parts], axis=1)

    def backward_fn(g):
        j = 0
        for p in parts:
            w = p.data.shape[1]
            _accumulate(p, g[:, j:j + w])
            j += w

    return _emit(out, tuple(parts), backward_fn, forward_fn)


def batch_matvec(mats: np.ndarray, v):
    """Per-sample matrix times vector: mats (N,r,r) constant, v (N,r)."""
    v = lift(v)
    mats = _as_f64(mats)
    out = Tensor(np.einsum("nij,nj->ni", mats, v.data), tracked=False)

    def forward_fn():
        out.data = np.einsum("nij,nj->ni", mats, v.data)

    def backward_fn(g):
        _accumulate(v, np.einsum("nij,ni->nj", mats, g), own=True)

    return _emit(out, (v,), backward_fn, forward_fn)


def relu_prime(z) -> np.ndarray:
    """Derivative of relu as data (piecewise constant, no gradient path)."""
    data = z.data if isinstance(z, Tensor) else _as_f64(z)
    return (data > 0.0) * 1.0


# ---------------------------------------------------------------------------
# Forward mode over input coordinates
# ---------------------------------------------------------------------------

class Jet:
    """Batched scalar carrying value, gradient, and diagonal second
    derivatives with respect to the ``d`` input coordinates.

    ``v`` has shape (N,), ``g`` and ``h`` shape (N, d).  Diagonal
    second-order propagation is exact for any composition of smooth
    primitives because each coordinate direction evolves as an independent
    1-d truncated Taylor series.  Closures operate on jets through plain
    numpy ufuncs (``np.sin`` etc.); anything outside the supported table
    raises :class:`UnsupportedPrimitiveError`.
    """

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v = _as_f64(v)
        self.g = _as_f64(g)
        self.h = _as_f64(h)

    @staticmethod
    def constant(value, n: int, d: int) -> "Jet":
        v = np.broadcast_to(_as_f64(value), (n,)).copy()
        return Jet(v, np.zeros((n, d)), np.zeros((n, d)))

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        n, d = self.g.shape
        return Jet.constant(other, n, d)

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.v + o.v, self.g + o.g, self.h + o.h)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Jet(self.v - o.v, self.g - o.g, self.h - o.h)

    def __rsub__(self, other):
        o = self._lift(other)
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        v = self.v * o.v
        g = self.g * o.v[:, None] + self.v[:, None] * o.g
        h = (self.h * o.v[:, None] + 2.0 * self.g * o.g + self.v[:, None] * o.h)
        return Jet(v, g, h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        o = self._lift(other)
        return o * self._reciprocal()

    def _reciprocal(self):
        inv = 1.0 / self.v
        g = -self.g * (inv * inv)[:, None]
        h = (-self.h * (inv * inv)[:, None]
             + 2.0 * self.g * self.g * (inv * inv * inv)[:, None])
        return Jet(inv, g, h)

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __pow__(self, p):
        p = float(p)
        return self._unary(self.v ** p,
                           p * self.v ** (p - 1.0),
                           p * (p - 1.0) * self.v ** (p - 2.0))

    def _unary(self, fv, f1, f2):
        g = f1[:, None] * self.g
        h = f2[:, None] * self.g * self.g + f1[:, None] * self.h
        return Jet(fv, g, h)

    # numpy ufunc dispatch ----------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            raise UnsupportedPrimitiveError(getattr(ufunc, "__name__", str(ufunc)))
        name = ufunc.__name__
        handler = _JET_UFUNCS.get(name)
        if handler is None:
            raise UnsupportedPrimitiveError(name)
        return handler(*inputs)


def _jet_in(x, like: Jet) -> Jet:
    return x if isinstance(x, Jet) else like._lift(x)


def _u_sin(x):
    return x._unary(np.sin(x.v), np.cos(x.v), -np.sin(x.v))


def _u_cos(x):
    return x._unary(np.cos(x.v), -np.sin(x.v), -np.cos(x.v))


def _u_exp(x):
    e = np.exp(x.v)
    return x._unary(e, e, e)


def _u_log(x):
    return x._unary(np.log(x.v), 1.0 / x.v, -1.0 / (x.v * x.v))


def _u_sqrt(x):
    s = np.sqrt(x.v)
    return x._unary(s, 0.5 / s, -0.25 / (s * x.v))


def _u_tanh(x):
    t = np.tanh(x.v)
    return x._unary(t, 1.0 - t * t, -2.0 * t * (1.0 - t * t))


def _u_arctan(x):
    q = 1.0 + x.v * x.v
    return x._unary(np.arctan(x.v), 1.0 / q, -2.0 * x.v / (q * q))


def _u_arcsin(x):
    q = 1.0 - x.v * x.v
    return x._unary(np.arcsin(x.v), q ** -0.5, x.v * q ** -1.5)


def _u_abs(x):
    s = np.sign(x.v)
    return x._unary(np.abs(x.v), s, np.zeros_like(x.v))


def _jet_maximum(a, b):
    ref = a if isinstance(a, Jet) else b
    ja = _jet_in(a, ref)
    jb = _jet_in(b, ref)
    take_a = ja.v >= jb.v
    m = take_a[:, None]
    return Jet(np.where(take_a, ja.v, jb.v),
               np.where(m, ja.g, jb.g),
               np.where(m, ja.h, jb.h))


def _jet_pair(a, b):
    ref = a if isinstance(a, Jet) else b
    return _jet_in(a, ref), _jet_in(b, ref)


def _b_add(a, b):
    ja, jb = _jet_pair(a, b)
    return ja + jb


def _b_sub(a, b):
    ja, jb = _jet_pair(a, b)
    return ja - jb


def _b_mul(a, b):
    ja, jb = _jet_pair(a, b)
    return ja * jb


def _b_div(a, b):
    ja, jb = _jet_pair(a, b)
    return ja / jb


def _b_pow(a, b):
    if isinstance(b, Jet):
        raise UnsupportedPrimitiveError("power with non-constant exponent")
    return a ** b


_JET_UFUNCS = {
    "sin": _u_sin,
    "cos": _u_cos,
    "exp": _u_exp,
    "log": _u_log,
    "sqrt": _u_sqrt,
    "tanh": _u_tanh,
    "arctan": _u_arctan,
    "arcsin": _u_arcsin,
    "absolute": _u_abs,
    "negative": lambda x: -x,
    "add": _b_add,
    "subtract": _b_sub,
    "multiply": _b_mul,
    "true_divide": _b_div,
    "power": _b_pow,
    "square": lambda x: x * x,
    "maximum": _jet_maximum,
}


def where(cond, a, b):
    """Piecewise select for jets or arrays; derivative follows the branch."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(cond, a, b)
    ref = a if isinstance(a, Jet) else b
    ja = _jet_in(a, ref)
    jb = _jet_in(b, ref)
    cond = np.asarray(cond, dtype=bool)
    m = cond[:, None]
    return Jet(np.where(cond, ja.v, jb.v),
               np.where(m, ja.g, jb.g),
               np.where(m, ja.h, jb.h))


def coordinate_jets(X: np.ndarray) -> list:
    """Seed jets for the columns of an (N, d) batch of points."""
    X = _as_f64(X)
    n, d = X.shape
    cols = []
    for k in range(d):
        g = np.zeros((n, d))
        g[:, k] = 1.0
        cols.append(Jet(X[:, k].copy(), g, np.zeros((n, d))))
    return cols


def _columns_of(out):
    if isinstance(out, (list, tuple)):
        return list(out)
    return [out]


def eval_columns(fn, X: np.ndarray) -> np.ndarray:
    """Evaluate a column-wise closure at plain points -> (N, r) values."""
    X = _as_f64(X)
    cols = _columns_of(fn([X[:, k] for k in range(X.shape[1])]))
    n = X.shape[0]
    out = np.empty((n, len(cols)))
    for j, c in enumerate(cols):
        out[:, j] = np.broadcast_to(_as_f64(c), (n,))
    return out


def value_and_grad(fn, X: np.ndarray):
    """Closure values (N, r) and input jacobian (N, r, d) by forward mode."""
    dual = forward_dual(fn, X)
    return dual.value, dual.input_jacobian


def value_grad_diag2(fn, X: np.ndarray):
    """Values, jacobian, and diagonal second derivatives (N, r, d) each."""
    X = _as_f64(X)
    n, d = X.shape
    cols = _columns_of(fn(coordinate_jets(X)))
    r = len(cols)
    v = np.empty((n, r))
    g = np.zeros((n, r, d))
    h = np.zeros((n, r, d))
    for j, c in enumerate(cols):
        if isinstance(c, Jet):
            v[:, j] = c.v
            g[:, j, :] = c.g
            h[:, j, :] = c.h
        else:
            v[:, j] = np.broadcast_to(_as_f64(c), (n,))
    return v, g, h


class DualBatch:
    """Per-sample values and exact input jacobians of a batched closure.

    ``value`` has shape (N, r); ``input_jacobian`` shape (N, r, d).
    """

    __slots__ = ("value", "input_jacobian")

    def __init__(self, value: np.ndarray, input_jacobian: np.ndarray):
        self.value = _as_f64(value)
        self.input_jacobian = _as_f64(input_jacobian)
        n, r = self.value.shape
        if self.input_jacobian.shape[:2] != (n, r):
            raise AutodiffError("jacobian shape must be batch x r x d")


def forward_dual(net_eval, points: np.ndarray) -> DualBatch:
    """Exact values and input jacobians of ``net_eval`` at ``points``.

    ``net_eval`` receives a list of coordinate columns (jets) and must
    combine them with supported primitives; it may return a single column
    or a sequence of columns.
    """
    v, g, _ = value_grad_diag2(net_eval, points)
    return DualBatch(v, g)
