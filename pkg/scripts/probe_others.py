"""Desk-scale probes for the non-fan presets (dev tool)."""
import os
import sys
import time

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

sys.path.insert(0, "src")
from friedrichs import problems
from friedrichs.losses import LossConfig
from friedrichs.training import TrainConfig, train, train_strong_form

LOSS = LossConfig(denominator_mode="sqrt-norm", volume_weighting="measure-weighted")

CONFIGS = {
    # preset, overrides, target
    "ell1": ("elliptic-15d",
             dict(n=3000, N=2000, N_b=2000, eta_s0=3e-3, eta_t0=3e-3,
                  nu_s=2000, nu_t=2000, m_s=64, m_t=64, theta_t=500), 0.04),
    "ell2": ("elliptic-15d",
             dict(n=3000, N=2000, N_b=2000, eta_s0=1e-2, eta_t0=3e-3,
                  nu_s=1500, nu_t=2000, m_s=64, m_t=64, theta_t=300), 0.04),
    "wav1": ("wave-complex-domain",
             dict(n=4000, N=2000, N_b=4000, eta_s0=1e-3, eta_t0=1e-2,
                  nu_s=2000, nu_t=2000, m_s=64, m_t=64, n_t=2, theta_t=200), 0.04),
    "max1": ("maxwell-cube",
             dict(n=3000, N=2000, N_b=0, eta_s0=1e-3, eta_t0=3e-3,
                  nu_s=2000, nu_t=2000, m_s=24, m_t=24, theta_t=500), 0.16),
    "max2": ("maxwell-cube",
             dict(n=3000, N=2000, N_b=0, eta_s0=3e-3, eta_t0=1e-2,
                  nu_s=1500, nu_t=1500, m_s=32, m_t=24, n_t=2, theta_t=300), 0.16),
    "dis1": ("advection-discontinuous",
             dict(n=2000, N=2000, N_b=4000, eta_s0=1e-3, eta_t0=1e-2,
                  nu_s=2000, nu_t=2000, m_s=48, m_t=48, n_t=2, theta_t=200), None),
    "dis2": ("advection-discontinuous",
             dict(n=7000, N=2000, N_b=4000, eta_s0=1e-3, eta_t0=1e-2,
                  nu_s=3000, nu_t=3000, m_s=(48, 64), m_t=48, n_t=2,
                  theta_s=(2000,), theta_t=200), 0.08),
    "bas1": ("advection-discontinuous",
             dict(n=2000, N=2000, N_b=4000, eta_s0=1e-3, nu_s=2000, m_s=48), None),
}

label = sys.argv[1]
name, overrides, target = CONFIGS[label]
p = problems.preset(name)
fields = {f: getattr(p.train_defaults, f) for f in p.train_defaults.__dataclass_fields__}
fields.update(overrides)
fields["seed"] = int(sys.argv[2]) if len(sys.argv) > 2 else 1
fields["eval_every"] = 200
fields["n_test_points"] = 4000
fields["target_e_l2"] = target
cfg = TrainConfig(**fields)

t0 = time.perf_counter()
if label.startswith("bas"):
    res = train_strong_form(p, cfg)
else:
    res = train(p, cfg, LOSS)
curve = " ".join(f"{h.e_l2:.3f}" for h in res.history)
print(f"{label} seed={fields['seed']} {time.perf_counter()-t0:6.1f}s "
      f"[{res.status}] eL2: {curve}", flush=True)
