"""Desk-scale hyperparameter scan for the fan preset (dev tool, not shipped)."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from friedrichs import problems
from friedrichs.losses import LossConfig
from friedrichs.metrics import dual_norm_residual
from friedrichs.training import TrainConfig, train

p = problems.preset("advection-fan")
QUAD = p.oracle_quadrature()
BASIS = p.oracle_basis()

configs = [
    # (label, denominator, eta_s0, eta_t0, n_t, theta_t)
    ("1 psq es1e-3 et3e-3 t250", "paper-squared", 1e-3, 3e-3, 1, 250),
    ("2 psq es3e-3 et3e-3 t250", "paper-squared", 3e-3, 3e-3, 1, 250),
    ("3 psq es1e-3 et1e-2 nt2", "paper-squared", 1e-3, 1e-2, 2, 250),
    ("4 sqn es1e-3 et3e-3 nt2", "sqrt-norm", 1e-3, 3e-3, 2, 250),
    ("5 psq es1e-3 et3e-3 nores", "paper-squared", 1e-3, 3e-3, 1, 0),
    ("6 sqn es3e-3 et1e-2 nt3", "sqrt-norm", 3e-3, 1e-2, 3, 500),
]

for label, den, es, et, n_t, tt in configs:
    t0 = time.perf_counter()
    cfg = TrainConfig(n=2000, N=2000, N_b=500, eta_s0=es, eta_t0=et,
                      nu_s=5000, nu_t=5000, m_s=64, m_t=64, n_t=n_t, theta_t=tt,
                      seed=1, eval_every=400, n_test_points=4000)
    lc = LossConfig(denominator_mode=den, volume_weighting="measure-weighted")
    try:
        res = train(p, cfg, lc)
        curve = " ".join(f"{h.e_l2:.3f}" for h in res.history)
        dn = dual_norm_residual(p.system, res.solution.as_closure(), BASIS, QUAD)
        print(f"{label:28s} {time.perf_counter()-t0:6.1f}s  eL2: {curve}  "
              f"dual={dn:.2e}", flush=True)
    except Exception as e:
        print(f"{label:28s} FAILED: {e}", flush=True)
