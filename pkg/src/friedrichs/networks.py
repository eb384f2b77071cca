"""Residual networks, hard boundary encoding, and the checkpoint format.

The core block structure is ``h_0 = V x``, ``g_l = act(W_l h_{l-1} + b_l)``,
``h_l = skip_l h_{l-2} + g_l`` where the skip matrix is the identity for even
``l`` and zero for odd ``l`` (``h_{-1} = 0``), with a linear readout
``a^T h_L``.  Forward passes run identically on plain float64 arrays or on
:class:`~friedrichs.autodiff.Tensor` parameters, and can carry stacked input
derivatives (first order, or first plus diagonal second order) alongside the
values so that weak-form losses get exact network jacobians.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "ResNetConfig",
    "ResNetParams",
    "ResNet",
    "SubnetStack",
    "BoundaryEncoder",
    "ConstrainedNet",
    "ClosureField",
    "init_params",
    "resnet_forward",
    "save_checkpoint",
    "load_checkpoint",
]

_SUPPORTED_SCHEMES = ("uniform-kaiming", "uniform-xavier")


@dataclass(frozen=True)
class ResNetConfig:
    """Architecture of one residual network."""

    d: int
    r: int = 1
    m: int = 50
    L: int = 7
    activation: str = "relu"  # "relu", "tanh", or "relu^k" for integer k >= 2

    def __post_init__(self):
        if self.L < 1 or self.m < 1:
            raise ValueError("depth and width must be >= 1")
        if self.activation not in ("relu", "tanh") and not self.activation.startswith("relu^"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def relu_power(self) -> int:
        if self.activation.startswith("relu^"):
            return int(self.activation.split("^", 1)[1])
        return 1


@dataclass
class ResNetParams:
    """Weights of one network: V (m,d), W_l (m,m), b_l (m,), a (m,r).

    Conventions the recursion leaves open, fixed here: the first block reads
    ``h_0 = V x`` (so ``g_1 = act(W_1 V x + b_1)``), the skip matrices are
    structural (identity / zero) rather than stored, and the readout has no
    bias.
    """

    V: np.ndarray
    W: list = field(default_factory=list)
    b: list = field(default_factory=list)
    a: np.ndarray = None

    def to_dict(self) -> dict:
        out = {"V": self.V, "a": self.a}
        for i, (w, bb) in enumerate(zip(self.W, self.b), start=1):
            out[f"W{i}"] = w
            out[f"b{i}"] = bb
        return out

    @staticmethod
    def from_dict(arrays: dict, L: int) -> "ResNetParams":
        return ResNetParams(
            V=arrays["V"],
            W=[arrays[f"W{i}"] for i in range(1, L + 1)],
            b=[arrays[f"b{i}"] for i in range(1, L + 1)],
            a=arrays["a"],
        )

    def copy(self) -> "ResNetParams":
        return ResNetParams(
            V=self.V.copy(),
            W=[w.copy() for w in self.W],
            b=[b.copy() for b in self.b],
            a=self.a.copy(),
        )


def _uniform_bound(scheme: str, fan_in: int, fan_out: int) -> float:
    if scheme == "uniform-kaiming":
        return np.sqrt(6.0 / fan_in)
    if scheme == "uniform-xavier":
        return np.sqrt(6.0 / (fan_in + fan_out))
    raise ValueError(f"unknown init scheme {scheme!r}; use one of {_SUPPORTED_SCHEMES}")


def init_params(config: ResNetConfig, seed, scheme: str | None = None) -> ResNetParams:
    """Deterministic uniform init; biases start at zero.

    Kaiming bounds for relu-family activations, Xavier for tanh, unless a
    scheme is forced.
    """
    if scheme is None:
        scheme = "uniform-xavier" if config.activation == "tanh" else "uniform-kaiming"
    rng = np.random.default_rng(seed)
    d, m, r = config.d, config.m, config.r
    V = rng.uniform(-1.0, 1.0, size=(m, d)) * _uniform_bound(scheme, d, m)
    W = [rng.uniform(-1.0, 1.0, size=(m, m)) * _uniform_bound(scheme, m, m)
         for _ in range(config.L)]
    b = [np.zeros(m) for _ in range(config.L)]
    a = rng.uniform(-1.0, 1.0, size=(m, r)) * _uniform_bound(scheme, m, r)
    return ResNetParams(V=V, W=W, b=b, a=a)


# -- dispatch helpers shared by the plain / tensor forward paths -------------

def _is_t(x) -> bool:
    return isinstance(x, Tensor)


def _T(x):
    return x.T if _is_t(x) else x.T


def _mm(a, b):
    if _is_t(a) or _is_t(b):
        return ad.matmul(a, b)
    return a @ b


def _tile(x, k):
    if _is_t(x):
        return ad.tile_rows(x, k)
    return np.tile(x, (k, 1))


def _repeat(x, n):
    if _is_t(x):
        return ad.repeat_rows(x, n)
    return np.repeat(x, n, axis=0)


def _act(kind: str, power: int, z):
    if kind == "tanh":
        return z.tanh() if _is_t(z) else np.tanh(z)
    r = z.relu() if _is_t(z) else np.maximum(z, 0.0)
    if power > 1:
        r = r ** power
    return r


def _act_prime(kind: str, power: int, z, val):
    # expressed through the activation value so tensor paths stay differentiable
    if kind == "tanh":
        return 1.0 - val * val
    step = ad.relu_prime(z) if _is_t(z) else (np.asarray(z) > 0.0) * 1.0
    if power == 1:
        return step
    base = z.relu() if _is_t(z) else np.maximum(z, 0.0)
    return float(power) * base ** (power - 1)


def _act_second(kind: str, power: int, z, val):
    if kind == "tanh":
        return -2.0 * val * (1.0 - val * val)
    if power == 1:
        return 0.0
    if power == 2:
        return 2.0 * (ad.relu_prime(z) if _is_t(z) else (np.asarray(z) > 0.0) * 1.0)
    base = z.relu() if _is_t(z) else np.maximum(z, 0.0)
    return float(power * (power - 1)) * base ** (power - 2)


def _forward_states(params, config: ResNetConfig, X: np.ndarray, order: int):
    """Shared forward pass.

    Returns (value, jac, diag2) where value is (N, r); jac and diag2 are
    direction-stacked (d*N, r) or None.  ``params`` maps names to ndarrays
    or tracked Tensors; mixing is allowed.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.d:
        raise ValueError(f"points must be (N, {config.d}), got {X.shape}")
    n, d = X.shape
    kind = "tanh" if config.activation == "tanh" else "relu"
    power = config.relu_power

    V = params["V"]
    h = _mm(X, _T(V))                       # (N, m)
    J = _repeat(_T(V), n) if order >= 1 else None   # (d*N, m)
    S = np.zeros((d * n, config.m)) if order >= 2 else None

    h_back2 = None  # h_{l-2}
    J_back2 = None
    S_back2 = None
    for layer in range(1, config.L + 1):
        W = params[f"W{layer}"]
        bias = params[f"b{layer}"]
        z = _mm(h, _T(W)) + bias
        g = _act(kind, power, z)
        if order >= 1:
            Jz = _mm(J, _T(W))
            ap = _tile(_act_prime(kind, power, z, g), d)
            Jg = ap * Jz
        if order >= 2:
            Sz = _mm(S, _T(W))
            a2 = _act_second(kind, power, z, g)
            Sg = ap * Sz if isinstance(a2, float) and a2 == 0.0 else \
                _tile(a2, d) * Jz * Jz + ap * Sz
        if layer % 2 == 0 and h_back2 is not None:
            g = h_back2 + g
            if order >= 1:
                Jg = J_back2 + Jg
            if order >= 2:
                Sg = S_back2 + Sg
        h_back2, h = h, g
        if order >= 1:
            J_back2, J = J, Jg
        if order >= 2:
            S_back2, S = S, Sg

    a = params["a"]
    out = _mm(h, a)
    Jout = _mm(J, a) if order >= 1 else None
    Sout = _mm(S, a) if order >= 2 else None
    return out, Jout, Sout


class ResNet:
    """A residual network plus its parameters."""

    def __init__(self, config: ResNetConfig, params: ResNetParams):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: ResNetConfig, seed, scheme: str | None = None) -> "ResNet":
        return cls(config, init_params(config, seed, scheme))

    @property
    def d(self):
        return self.config.d

    @property
    def r(self):
        return self.config.r

    def param_arrays(self) -> dict:
        return self.params.to_dict()

    def set_param_arrays(self, arrays: dict) -> None:
        self.params = ResNetParams.from_dict(arrays, self.config.L)

    def forward(self, X, params=None):
        p = params if params is not None else self.params.to_dict()
        out, _, _ = _forward_states(p, self.config, X, order=0)
        return out

    def forward_jac(self, X, params=None):
        p = params if params is not None else self.params.to_dict()
        out, J, _ = _forward_states(p, self.config, X, order=1)
        return out, J

    def forward_jet(self, X, params=None):
        p = params if params is not None else self.params.to_dict()
        return _forward_states(p, self.config, X, order=2)


def resnet_forward(params: ResNetParams, X, config: ResNetConfig):
    """Functional forward pass -> (N, r) values."""
    out, _, _ = _forward_states(params.to_dict(), config, X, order=0)
    return out


class SubnetStack:
    """Vector-valued field made of independent scalar networks.

    Parameter names are prefixed ``sub{i}.`` so a flat dict addresses the
    whole stack.
    """

    def __init__(self, nets: list):
        if not nets:
            raise ValueError("empty stack")
        self.nets = nets
        self.d = nets[0].d
        if any(net.d != self.d for net in nets):
            raise ValueError("subnets disagree on input dimension")
        self.r = sum(net.r for net in nets)

    @classmethod
    def create(cls, config: ResNetConfig, n_subnets: int, seed) -> "SubnetStack":
        seeds = np.random.SeedSequence(seed).spawn(n_subnets)
        return cls([ResNet.create(config, s) for s in seeds])

    def param_arrays(self) -> dict:
        out = {}
        for i, net in enumerate(self.nets):
            for k, v in net.param_arrays().items():
                out[f"sub{i}.{k}"] = v
        return out

    def set_param_arrays(self, arrays: dict) -> None:
        for i, net in enumerate(self.nets):
            prefix = f"sub{i}."
            net.set_param_arrays({k[len(prefix):]: v for k, v in arrays.items()
                                  if k.startswith(prefix)})

    def _sub_params(self, params, i):
        if params is None:
            return None
        prefix = f"sub{i}."
        return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}

    def _concat(self, parts):
        if any(_is_t(p) for p in parts):
            return ad.concat_cols(parts)
        return np.concatenate(parts, axis=1)

    def forward(self, X, params=None):
        return self._concat([net.forward(X, self._sub_params(params, i))
                             for i, net in enumerate(self.nets)])

    def forward_jac(self, X, params=None):
        vals, jacs = [], []
        for i, net in enumerate(self.nets):
            v, J = net.forward_jac(X, self._sub_params(params, i))
            vals.append(v)
            jacs.append(J)
        return self._concat(vals), self._concat(jacs)

    def forward_jet(self, X, params=None):
        vals, jacs, secs = [], [], []
        for i, net in enumerate(self.nets):
            v, J, S = net.forward_jet(X, self._sub_params(params, i))
            vals.append(v)
            jacs.append(J)
            secs.append(S)
        return self._concat(vals), self._concat(jacs), self._concat(secs)


@dataclass
class BoundaryEncoder:
    """The pair (h, b) realizing ``phi = h * phi_hat + b``.

    ``h`` vanishes on the constrained boundary part and ``b`` matches the
    prescribed data there, so the wrapped network satisfies its boundary
    condition by construction.  Both are column closures; ``h`` may return
    one column (shared mask) or one per output component, ``b`` may be None
    for zero data.
    """

    h: object = None
    b: object = None

    def h_values(self, X: np.ndarray, r: int) -> np.ndarray:
        if self.h is None:
            return np.ones((X.shape[0], r))
        vals = ad.eval_columns(self.h, X)
        return np.broadcast_to(vals, (X.shape[0], r)) if vals.shape[1] == 1 else vals

    def b_values(self, X: np.ndarray, r: int) -> np.ndarray:
        if self.b is None:
            return np.zeros((X.shape[0], r))
        vals = ad.eval_columns(self.b, X)
        return np.broadcast_to(vals, (X.shape[0], r)) if vals.shape[1] == 1 else vals

    def _expand(self, v, g, h2, r):
        # broadcast a shared scalar mask across r output components
        if v.shape[1] == r:
            return v, g, h2
        return (np.broadcast_to(v, (v.shape[0], r)),
                np.broadcast_to(g, (g.shape[0], r, g.shape[2])),
                np.broadcast_to(h2, (h2.shape[0], r, h2.shape[2])))

    def h_jet(self, X, r):
        if self.h is None:
            n, d = X.shape
            return (np.ones((n, r)), np.zeros((n, r, d)), np.zeros((n, r, d)))
        return self._expand(*ad.value_grad_diag2(self.h, X), r)

    def b_jet(self, X, r):
        if self.b is None:
            n, d = X.shape
            return (np.zeros((n, r)), np.zeros((n, r, d)), np.zeros((n, r, d)))
        return self._expand(*ad.value_grad_diag2(self.b, X), r)


def _stack_dirs(arr: np.ndarray) -> np.ndarray:
    """(N, r, d) -> direction-stacked (d*N, r)."""
    n, r, d = arr.shape
    return np.ascontiguousarray(np.moveaxis(arr, 2, 0).reshape(d * n, r))


class ConstrainedNet:
    """A network composed with a hard boundary encoding.

    Exposes values, direction-stacked input jacobians, and diagonal second
    derivatives, on plain arrays or tracked tensors.  With no encoder this
    is just the bare network.
    """

    def __init__(self, core, encoder: BoundaryEncoder | None = None):
        self.core = core
        self.encoder = encoder

    @property
    def d(self):
        return self.core.d

    @property
    def r(self):
        return self.core.r

    def param_arrays(self) -> dict:
        return self.core.param_arrays()

    def set_param_arrays(self, arrays: dict) -> None:
        self.core.set_param_arrays(arrays)

    def tensor_params(self) -> dict:
        return {k: Tensor(v.copy()) for k, v in self.core.param_arrays().items()}

    def values(self, X, params=None):
        raw = self.core.forward(X, params)
        if self.encoder is None:
            return raw
        hv = self.encoder.h_values(X, self.r)
        bv = self.encoder.b_values(X, self.r)
        return hv * raw + bv

    def jacobian(self, X, params=None):
        """Returns (values (N, r), jac stacked (d*N, r))."""
        raw, Jraw = self.core.forward_jac(X, params)
        if self.encoder is None:
            return raw, Jraw
        n, d = X.shape
        hv, hg, _ = self.encoder.h_jet(X, self.r)
        bv, bg, _ = self.encoder.b_jet(X, self.r)
        hg_s = _stack_dirs(hg)
        bg_s = _stack_dirs(bg)
        val = hv * raw + bv
        J = hg_s * _tile(raw, d) + np.tile(hv, (d, 1)) * Jraw + bg_s
        return val, J

    def jet(self, X, params=None):
        """Values, stacked jacobian, stacked diagonal second derivatives."""
        raw, Jraw, Sraw = self.core.forward_jet(X, params)
        if self.encoder is None:
            return raw, Jraw, Sraw
        n, d = X.shape
        hv, hg, hh = self.encoder.h_jet(X, self.r)
        bv, bg, bh = self.encoder.b_jet(X, self.r)
        hg_s, hh_s = _stack_dirs(hg), _stack_dirs(hh)
        bg_s, bh_s = _stack_dirs(bg), _stack_dirs(bh)
        hv_t = np.tile(hv, (d, 1))
        val = hv * raw + bv
        J = hg_s * _tile(raw, d) + hv_t * Jraw + bg_s
        S = hh_s * _tile(raw, d) + 2.0 * hg_s * Jraw + hv_t * Sraw + bh_s
        return val, J, S

    def as_closure(self):
        """Frozen copy usable as a column closure (for boundary lifts)."""
        return _net_closure(self.core, self.encoder)


def _net_closure(core, encoder):
    """Evaluate a frozen constrained net under coordinate jets or arrays."""
    frozen = {k: v.copy() for k, v in core.param_arrays().items()}
    config_d = core.d
    r = core.r

    def closure(cols):
        first = cols[0]
        if isinstance(first, ad.Jet):
            for i, c in enumerate(cols):
                if not isinstance(c, ad.Jet):
                    raise ad.AutodiffError("mixed jet/array columns")
                ok = (c.g.shape[1] == len(cols) and not c.h.any()
                      and np.all(c.g[:, i] == 1.0)
                      and np.count_nonzero(c.g) == c.g.shape[0])
                if not ok:
                    raise ad.AutodiffError(
                        "network closures require raw coordinate jets")
            X = np.stack([c.v for c in cols], axis=1)
            n, d = X.shape
            if encoder is None:
                v, J, S = core.forward_jet(X, frozen)
            else:
                v, J, S = _constrained_jet(core, encoder, X, frozen, r)
            out = []
            for j in range(r):
                g = np.stack([J[k * n:(k + 1) * n, j] for k in range(d)], axis=1)
                h2 = np.stack([S[k * n:(k + 1) * n, j] for k in range(d)], axis=1)
                out.append(ad.Jet(v[:, j], g, h2))
            return out if r > 1 else out[0]
        X = np.stack([np.asarray(c, dtype=np.float64) for c in cols], axis=1)
        if encoder is None:
            vals = core.forward(X, frozen)
        else:
            hv = encoder.h_values(X, r)
            bv = encoder.b_values(X, r)
            vals = hv * core.forward(X, frozen) + bv
        return [vals[:, j] for j in range(r)] if r > 1 else vals[:, 0]

    closure.d = config_d
    closure.r = r
    return closure


def _constrained_jet(core, encoder, X, params, r):
    raw, Jraw, Sraw = core.forward_jet(X, params)
    n, d = X.shape
    hv, hg, hh = encoder.h_jet(X, r)
    bv, bg, bh = encoder.b_jet(X, r)
    hg_s, hh_s = _stack_dirs(hg), _stack_dirs(hh)
    bg_s, bh_s = _stack_dirs(bg), _stack_dirs(bh)
    hv_t = np.tile(hv, (d, 1))
    val = hv * raw + bv
    J = hg_s * np.tile(raw, (d, 1)) + hv_t * Jraw + bg_s
    S = hh_s * np.tile(raw, (d, 1)) + 2.0 * hg_s * Jraw + hv_t * Sraw + bh_s
    return val, J, S


class ClosureField:
    """Adapter presenting a column closure through the network interface.

    Lets oracles and losses treat analytic fields (exact solutions, fixed
    test functions) exactly like networks.
    """

    def __init__(self, fn, d: int, r: int = 1):
        self.fn = fn
        self.d = d
        self.r = r

    def param_arrays(self):
        return {}

    def values(self, X, params=None):
        return ad.eval_columns(self.fn, X)

    def jacobian(self, X, params=None):
        v, g = ad.value_and_grad(self.fn, X)
        return v, _stack_dirs(g)

    def jet(self, X, params=None):
        v, g, h2 = ad.value_grad_diag2(self.fn, X)
        return v, _stack_dirs(g), _stack_dirs(h2)

    def as_closure(self):
        return self.fn


# ---------------------------------------------------------------------------
# Checkpoints: versioned header, named little-endian float64 arrays
# ---------------------------------------------------------------------------

_MAGIC = b"FWNC"
_VERSION = 1


def save_checkpoint(path: str, arrays: dict, meta: dict | None = None) -> None:
    """Write named parameter arrays with shapes; round-trips bit-exactly."""
    meta_blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(arrays)))
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            blob = name.encode("utf-8")
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str):
    """Read a checkpoint -> (arrays, meta)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape)
            arrays[name] = data.astype(np.float64).copy()
        return arrays, meta
