"""Alternating minimax training with restarts.

One outer iteration runs ``n_s`` descent steps on the solution parameters
(fresh samples every step), then ``n_t`` ascent steps on the test parameters
(fresh samples again).  At a solution-restart iteration the current solution
network is frozen into the lift ``b(x)`` and a fresh trainable network is
wrapped around it; at a test-restart iteration the test parameters are
re-initialized.  Learning rates decay exponentially in the outer iteration
count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .losses import NonFiniteLossError
from .metrics import errors_from_values
from .sampling import make_batch

__all__ = [
    "TrainConfig",
    "HistoryEntry",
    "TrainResult",
    "Adam",
    "RMSprop",
    "lr_schedule",
    "adam_step",
    "rmsprop_step",
    "train",
    "train_strong_form",
]


def lr_schedule(eta0: float, nu: float, k: int) -> float:
    """Exponential decay: eta0 * (1/10)^(k / nu)."""
    if nu <= 0:
        raise ValueError("decay constant nu must be positive")
    return float(eta0) * 10.0 ** (-(k / float(nu)))


class Adam:
    """Standard first/second moment optimizer; beta = (0.9, 0.999)."""

    def __init__(self, shapes: dict, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float, ascent: bool = False) -> dict:
        self.t += 1
        out = {}
        sign = -1.0 if ascent else 1.0
        for k, p in params.items():
            g = sign * grads[k]
            if not np.all(np.isfinite(g)):
                raise NonFiniteLossError(f"non-finite gradient for {k}")
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1**self.t)
            vhat = self.v[k] / (1 - self.beta2**self.t)
            out[k] = p - lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


class RMSprop:
    """Running mean-square optimizer; rho = 0.99."""

    def __init__(self, shapes: dict, rho: float = 0.99, eps: float = 1e-8):
        self.rho, self.eps = rho, eps
        self.s = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, params: dict, grads: dict, lr: float, ascent: bool = False) -> dict:
        out = {}
        sign = -1.0 if ascent else 1.0
        for k, p in params.items():
            g = sign * grads[k]
            if not np.all(np.isfinite(g)):
                raise NonFiniteLossError(f"non-finite gradient for {k}")
            self.s[k] = self.rho * self.s[k] + (1 - self.rho) * g * g
            out[k] = p - lr * g / (np.sqrt(self.s[k]) + self.eps)
        return out


def adam_step(params, grads, state: Adam, lr, ascent=False):
    return state.step(params, grads, lr, ascent=ascent)


def rmsprop_step(params, grads, state: RMSprop, lr, ascent=False):
    return state.step(params, grads, lr, ascent=ascent)


def _make_optimizer(kind: str, shapes: dict):
    if kind == "adam":
        return Adam(shapes)
    if kind == "rmsprop":
        return RMSprop(shapes)
    raise ValueError(f"unknown optimizer {kind!r}")


@dataclass
class TrainConfig:
    """Loop and sampling sizes; names follow the run-config key set."""

    n: int = 1000                  # outer iterations
    n_s: int = 1                   # inner solution steps
    n_t: int = 1                   # inner test steps
    N: int = 2000                  # interior samples per step
    N_b: int = 500                 # boundary samples per step
    eta_s0: float = 1e-3
    eta_t0: float = 1e-3
    nu_s: float = 10000.0
    nu_t: float = 10000.0
    theta_s: tuple = ()            # solution restart iterations
    theta_t: object = ()           # test restart iterations, or int period
    m_s: object = 64               # width, or per-phase widths across restarts
    m_t: int = 64
    optimizer_s: str = "adam"
    optimizer_t: str = "rmsprop"
    seed: int = 0
    eval_every: int = 100
    n_test_points: int = 10000
    target_e_l2: float | None = None
    plateau_window: int | None = None
    plateau_tol: float = 0.01
    max_seconds: float | None = None

    def __post_init__(self):
        for name in ("n", "n_s", "n_t", "N", "N_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("eta_s0", "eta_t0", "nu_s", "nu_t"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def solution_widths(self) -> list:
        widths = self.m_s if isinstance(self.m_s, (list, tuple)) else [self.m_s]
        return [int(w) for w in widths]

    def is_test_restart(self, k: int) -> bool:
        if isinstance(self.theta_t, int):
            return self.theta_t > 0 and k % self.theta_t == 0
        return k in set(self.theta_t)


@dataclass
class HistoryEntry:
    iteration: int
    loss: float
    e_l2: float
    e_linf: float | None
    lr_s: float
    lr_t: float
    wall_time_s: float


@dataclass
class TrainResult:
    solution: object
    test: object
    history: list
    status: str
    config: TrainConfig
    best_e_l2: float = np.inf

    def best(self) -> float:
        return min((h.e_l2 for h in self.history), default=np.inf)


def _evaluate(preset, sol, probe):
    pred = sol.values(probe)
    exact = preset.exact_values(probe)
    rep = errors_from_values(pred, exact, linf_valid=preset.continuous)
    return rep.e_l2, rep.e_linf


@dataclass
class _Stopper:
    cfg: TrainConfig
    t0: float
    best: float = np.inf
    best_iter: int = 0

    def update(self, k: int, e_l2: float) -> str | None:
        if e_l2 < self.best * (1.0 - self.cfg.plateau_tol):
            self.best, self.best_iter = e_l2, k
        elif e_l2 < self.best:
            self.best = e_l2
        if self.cfg.target_e_l2 is not None and e_l2 <= self.cfg.target_e_l2:
            return "target-reached"
        if (self.cfg.plateau_window is not None
                and k - self.best_iter >= self.cfg.plateau_window):
            return "plateau"
        if (self.cfg.max_seconds is not None
                and time.perf_counter() - self.t0 > self.cfg.max_seconds):
            return "time-budget"
        return None


def train(preset, cfg: TrainConfig, loss_cfg=None, on_eval=None) -> TrainResult:
    """Run the restarted alternating minimax loop on one problem preset.

    ``on_eval(iteration, solution, test, history)`` fires at every recorded
    evaluation point; the command line uses it to keep a rolling checkpoint
    so an aborted run still leaves its last state on disk.
    """
    loss_cfg = loss_cfg if loss_cfg is not None else preset.loss_defaults
    seeds = np.random.SeedSequence(cfg.seed)
    s_sample, s_init_s, s_init_t, s_restarts = seeds.spawn(4)
    rng = np.random.default_rng(s_sample)
    restart_seeds = s_restarts.spawn(max(1, cfg.n + 1))

    widths = cfg.solution_widths()
    sol = preset.build_solution_net(widths[0], s_init_s)
    test = preset.build_test_net(cfg.m_t, s_init_t)
    opt_s = _make_optimizer(cfg.optimizer_s, {k: v.shape for k, v in sol.param_arrays().items()})
    opt_t = _make_optimizer(cfg.optimizer_t, {k: v.shape for k, v in test.param_arrays().items()})

    probe = preset.test_points(cfg.n_test_points)
    pieces = preset.training_boundary_pieces(loss_cfg)
    history: list = []
    t0 = time.perf_counter()
    stopper = _Stopper(cfg, t0)
    status = "budget-exhausted"
    phase = 0
    last_loss = np.nan

    def record(k, lr_s, lr_t):
        e_l2, e_linf = _evaluate(preset, sol, probe)
        history.append(HistoryEntry(
            iteration=k, loss=last_loss, e_l2=e_l2, e_linf=e_linf,
            lr_s=lr_s, lr_t=lr_t, wall_time_s=time.perf_counter() - t0))
        if on_eval is not None:
            on_eval(k, sol, test, history)
        return stopper.update(k, e_l2)

    if cfg.n == 0:
        return TrainResult(sol, test, history, "budget-exhausted", cfg)

    restart_iter = iter(restart_seeds)
    for k in range(1, cfg.n + 1):
        lr_s = lr_schedule(cfg.eta_s0, cfg.nu_s, k)
        lr_t = lr_schedule(cfg.eta_t0, cfg.nu_t, k)

        if k in set(cfg.theta_s):
            phase = min(phase + 1, len(widths) - 1)
            sol = preset.restart_solution_net(sol, widths[phase], next(restart_iter),
                                              boundary_handling=loss_cfg.boundary_handling)
            opt_s = _make_optimizer(cfg.optimizer_s,
                                    {k2: v.shape for k2, v in sol.param_arrays().items()})

        for _ in range(cfg.n_s):
            batch = make_batch(preset.domain, cfg.N, cfg.N_b, rng, pieces=pieces)
            last_loss, gs, _ = preset.loss_grads(sol, test, batch, loss_cfg, wrt="s")
            sol.set_param_arrays(opt_s.step(sol.param_arrays(), gs, lr_s))

        if cfg.is_test_restart(k):
            test = preset.build_test_net(cfg.m_t, next(restart_iter))
            opt_t = _make_optimizer(cfg.optimizer_t,
                                    {k2: v.shape for k2, v in test.param_arrays().items()})

        for _ in range(cfg.n_t):
            batch = make_batch(preset.domain, cfg.N, cfg.N_b, rng, pieces=pieces)
            last_loss, _, gt = preset.loss_grads(sol, test, batch, loss_cfg, wrt="t")
            test.set_param_arrays(opt_t.step(test.param_arrays(), gt, lr_t, ascent=True))

        if k % cfg.eval_every == 0 or k == cfg.n:
            why = record(k, lr_s, lr_t)
            if why is not None:
                status = why
                break

    result = TrainResult(sol, test, history, status, cfg)
    result.best_e_l2 = result.best()
    return result


def train_strong_form(preset, cfg: TrainConfig) -> TrainResult:
    """Least-squares training of the strong residual (comparison baseline).

    Uses the preset's baseline network (smooth activation) and the same
    sampling, schedule, and bookkeeping as the minimax loop.
    """
    seeds = np.random.SeedSequence(cfg.seed)
    s_sample, s_init = seeds.spawn(2)
    rng = np.random.default_rng(s_sample)

    sol = preset.build_baseline_net(cfg.solution_widths()[0], s_init)
    opt = _make_optimizer(cfg.optimizer_s,
                          {k: v.shape for k, v in sol.param_arrays().items()})
    probe = preset.test_points(cfg.n_test_points)
    history: list = []
    t0 = time.perf_counter()
    stopper = _Stopper(cfg, t0)
    status = "budget-exhausted"
    last_loss = np.nan

    for k in range(1, cfg.n + 1):
        lr = lr_schedule(cfg.eta_s0, cfg.nu_s, k)
        for _ in range(cfg.n_s):
            batch = make_batch(preset.domain, cfg.N, cfg.N_b, rng)
            last_loss, gs = preset.baseline_loss_grads(sol, batch)
            sol.set_param_arrays(opt.step(sol.param_arrays(), gs, lr))
        if k % cfg.eval_every == 0 or k == cfg.n:
            e_l2, e_linf = _evaluate(preset, sol, probe)
            history.append(HistoryEntry(k, last_loss, e_l2, e_linf, lr, 0.0,
                                        time.perf_counter() - t0))
            why = stopper.update(k, e_l2)
            if why is not None:
                status = why
                break

    result = TrainResult(sol, None, history, status, cfg)
    result.best_e_l2 = result.best()
    return result
