"""Refined fan probe with active-piece boundary sampling (dev tool)."""
import os
import sys
import time

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

sys.path.insert(0, "src")
from friedrichs import problems
from friedrichs.losses import LossConfig
from friedrichs.training import TrainConfig, train

p = problems.preset("advection-fan")

CONFIGS = {
    "r1": ("sqrt-norm", 1e-3, 1e-2, 2000, 2000, 2, 200, (), 64),
    "r2": ("paper-squared", 1e-3, 1e-2, 2000, 2000, 2, 200, (), 64),
    "r3": ("sqrt-norm", 2e-3, 1e-2, 1500, 2000, 2, 200, (), 64),
    "r4": ("sqrt-norm", 1e-3, 3e-3, 2500, 2500, 3, 100, (), 64),
    "r5": ("sqrt-norm", 1e-3, 1e-2, 3000, 3000, 2, 200, (2500,), (64, 64)),
    "r6": ("sqrt-norm", 1e-3, 1e-2, 3500, 3500, 2, 200, (), 64),
    "r7": ("sqrt-norm", 1e-3, 1e-2, 3000, 3000, 2, 400, (1700, 3400), (64, 64, 64)),
}

label = sys.argv[1]
den, es, et, nus, nut, n_t, tt, ts, ms = CONFIGS[label]
t0 = time.perf_counter()
cfg = TrainConfig(n=5000, N=2000, N_b=4000, eta_s0=es, eta_t0=et,
                  nu_s=nus, nu_t=nut, m_s=ms, m_t=64, n_t=n_t, theta_t=tt,
                  theta_s=ts, seed=1, eval_every=250, n_test_points=4000,
                  target_e_l2=0.035)
lc = LossConfig(denominator_mode=den, volume_weighting="measure-weighted")
res = train(p, cfg, lc)
curve = " ".join(f"{h.e_l2:.3f}" for h in res.history)
losses = " ".join(f"{h.loss:.2e}" for h in res.history[::4])
print(f"{label} {time.perf_counter()-t0:6.1f}s [{res.status}] eL2: {curve}\n"
      f"   losses: {losses}", flush=True)
