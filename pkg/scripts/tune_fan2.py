"""Focused fan scan: stability-oriented schedules (dev tool)."""
import os
import sys
import time

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np

sys.path.insert(0, "src")
from friedrichs import problems
from friedrichs.losses import LossConfig
from friedrichs.training import TrainConfig, train

p = problems.preset("advection-fan")

CONFIGS = {
    # label: (den, es, et, nu_s, nu_t, n_s, n_t, theta_t, N, n)
    "s1": ("paper-squared", 1e-3, 1e-2, 2000, 2000, 1, 2, 200, 2000, 3000),
    "s2": ("paper-squared", 3e-3, 1e-2, 1200, 2000, 1, 2, 200, 1000, 3000),
    "s3": ("paper-squared", 1e-3, 3e-3, 2500, 2500, 2, 1, 250, 2000, 3000),
    "s4": ("sqrt-norm", 1e-3, 1e-2, 2000, 2000, 1, 2, 200, 2000, 3000),
    "s5": ("paper-squared", 1e-3, 1e-2, 2000, 2000, 1, 2, 0, 2000, 3000),
    "s6": ("paper-squared", 1e-3, 1e-2, 3000, 3000, 1, 2, 500, 3000, 3000),
}

label = sys.argv[1]
den, es, et, nus, nut, n_s, n_t, tt, N, n = CONFIGS[label]
t0 = time.perf_counter()
cfg = TrainConfig(n=n, N=N, N_b=max(N // 4, 200), eta_s0=es, eta_t0=et,
                  nu_s=nus, nu_t=nut, m_s=64, m_t=64, n_s=n_s, n_t=n_t,
                  theta_t=tt, seed=1, eval_every=300, n_test_points=4000)
lc = LossConfig(denominator_mode=den, volume_weighting="measure-weighted")
res = train(p, cfg, lc)
curve = " ".join(f"{h.e_l2:.3f}" for h in res.history)
print(f"{label} {time.perf_counter()-t0:6.1f}s  eL2: {curve}", flush=True)
