"""Command line entry point: train, evaluate, verify, baseline.

Runs are configured by flags plus an optional JSON config file with nested
sections (``train``, ``loss``, ``geometry``); unknown keys anywhere are
rejected so typos fail loudly instead of silently using defaults.  All
artifacts (history CSV, checkpoints, field dumps, reports) are written
atomically into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .losses import LossConfig, NonFiniteLossError
from .metrics import dual_norm_residual, write_history_csv
from .networks import load_checkpoint, save_checkpoint
from .problems import PRESET_NAMES, exact_error_probe, preset
from .sampling import Hypercube
from .systems import coercivity_check, integration_by_parts_residual, symmetry_defect
from .training import TrainConfig, train, train_strong_form

_MODES = ("train", "evaluate", "verify", "baseline")

_TRAIN_KEYS = set(TrainConfig.__dataclass_fields__)
_LOSS_KEYS = set(LossConfig.__dataclass_fields__)
_TOP_KEYS = {"preset", "mode", "seed", "out", "workers", "train", "loss",
             "geometry", "checkpoint", "grid"}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for section, allowed in (("train", _TRAIN_KEYS), ("loss", _LOSS_KEYS)):
        sub = cfg.get(section, {})
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown {section} keys: {sorted(bad)}")
    return cfg


def _resolve(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    if args.preset:
        cfg["preset"] = args.preset
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.iters is not None:
        cfg.setdefault("train", {})["n"] = args.iters
    if args.out:
        cfg["out"] = args.out
    if args.mode:
        cfg["mode"] = args.mode
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.checkpoint:
        cfg["checkpoint"] = args.checkpoint
    cfg.setdefault("mode", "train")
    cfg.setdefault("seed", 0)
    cfg.setdefault("out", "runs/latest")
    if "preset" not in cfg:
        raise ConfigError("a preset is required (flag --preset or config key)")
    if cfg["preset"] not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {cfg['preset']!r}; choose from {PRESET_NAMES}")
    if cfg["mode"] not in _MODES:
        raise ConfigError(f"unknown mode {cfg['mode']!r}; choose from {_MODES}")
    return cfg


def _build(cfg):
    prob = preset(cfg["preset"], geometry=cfg.get("geometry"))
    fields = {f: getattr(prob.train_defaults, f)
              for f in prob.train_defaults.__dataclass_fields__}
    fields.update(cfg.get("train", {}))
    fields["seed"] = cfg["seed"]
    if isinstance(fields.get("theta_s"), list):
        fields["theta_s"] = tuple(fields["theta_s"])
    if isinstance(fields.get("theta_t"), list):
        fields["theta_t"] = tuple(fields["theta_t"])
    train_cfg = TrainConfig(**fields)
    loss_fields = {f: getattr(prob.loss_defaults, f)
                   for f in prob.loss_defaults.__dataclass_fields__}
    loss_fields.update(cfg.get("loss", {}))
    loss_cfg = LossConfig(**loss_fields)
    return prob, train_cfg, loss_cfg


def _atomic_json(path: str, payload: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=repr)
    os.replace(tmp, path)


def _dump_field(path: str, prob, field, grid: int) -> None:
    """Solution values on a regular grid (rows outside the domain skipped),
    as plain CSV for external plotting."""
    lo, hi = prob.domain.bounding_box()
    d = prob.domain.d
    if d > 3:
        # slice through the first two coordinates, others at the center
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(2)]
        G = np.meshgrid(*axes, indexing="ij")
        pts = np.tile(0.5 * (lo + hi), (grid * grid, 1))
        pts[:, 0] = G[0].ravel()
        pts[:, 1] = G[1].ravel()
    else:
        axes = [np.linspace(lo[k], hi[k], grid) for k in range(d)]
        G = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in G], axis=1)
    inside = prob.domain.contains(pts)
    pts = pts[inside]
    vals = field.values(pts)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        cols = [f"x{k}" for k in range(pts.shape[1])] + \
            [f"value{j}" if vals.shape[1] > 1 else "value" for j in range(vals.shape[1])]
        fh.write(",".join(cols) + "\n")
        for row, val in zip(pts, vals):
            fh.write(",".join(f"{x:.10g}" for x in row) + "," +
                     ",".join(f"{v:.16g}" for v in val) + "\n")
    os.replace(tmp, path)


def _save_nets(out, result, prob, cfg, extra_meta=None):
    meta = {"preset": prob.name, "seed": cfg["seed"], "version": __version__}
    meta.update(extra_meta or {})
    save_checkpoint(os.path.join(out, "solution.ckpt"),
                    result.solution.param_arrays(), meta)
    if result.test is not None:
        save_checkpoint(os.path.join(out, "test.ckpt"),
                        result.test.param_arrays(), meta)


def _final_metrics(prob, field):
    report = exact_error_probe(prob, field)
    return {"e_L2": report.e_l2, "e_Linf": report.e_linf,
            "n_test_points": report.n_points}


def cmd_train(cfg, baseline: bool = False) -> int:
    prob, train_cfg, loss_cfg = _build(cfg)
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)

    def keep_checkpoint(k, sol, test, history):
        meta = {"preset": prob.name, "seed": cfg["seed"], "iteration": k,
                "version": __version__}
        save_checkpoint(os.path.join(out, "solution.ckpt"), sol.param_arrays(), meta)
        if test is not None:
            save_checkpoint(os.path.join(out, "test.ckpt"), test.param_arrays(), meta)
        write_history_csv(os.path.join(out, "history.csv"), history)

    try:
        if baseline:
            result = train_strong_form(prob, train_cfg)
        else:
            result = train(prob, train_cfg, loss_cfg, on_eval=keep_checkpoint)
    except NonFiniteLossError as err:
        # the rolling checkpoint from the last evaluation point survives
        print(f"aborted: {err}", file=sys.stderr)
        return 3
    write_history_csv(os.path.join(out, "history.csv"), result.history)
    _save_nets(out, result, prob, cfg, {"mode": "baseline" if baseline else "train"})
    _dump_field(os.path.join(out, "field.csv"), prob, result.solution,
                int(cfg.get("grid", 101)))
    metrics = _final_metrics(prob, result.solution)
    metrics["status"] = result.status
    metrics["iterations"] = result.history[-1].iteration if result.history else 0
    _atomic_json(os.path.join(out, "metrics.json"), metrics)
    _atomic_json(os.path.join(out, "config.json"),
                 {"preset": prob.name, "mode": cfg["mode"], "seed": cfg["seed"],
                  "train": asdict(train_cfg), "loss": asdict(loss_cfg)})
    print(f"trained {prob.name}: status={result.status} "
          f"e_L2={metrics['e_L2']:.4e} artifacts in {out}")
    return 0


def cmd_evaluate(cfg) -> int:
    if "checkpoint" not in cfg:
        raise ConfigError("evaluate mode needs --checkpoint")
    prob, _, _ = _build(cfg)
    arrays, meta = load_checkpoint(cfg["checkpoint"])
    width = _width_from_arrays(arrays)
    sol = prob.build_solution_net(width, seed=0)
    sol.set_param_arrays(arrays)
    metrics = _final_metrics(prob, sol)
    metrics["checkpoint"] = cfg["checkpoint"]
    metrics["checkpoint_meta"] = meta
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    _atomic_json(os.path.join(out, "metrics.json"), metrics)
    print(json.dumps(metrics, indent=2, default=repr))
    return 0


def _width_from_arrays(arrays) -> int:
    key = "V" if "V" in arrays else "sub0.V"
    return arrays[key].shape[0]


def cmd_verify(cfg) -> int:
    """Oracle suite for one preset; prints one PASS/FAIL line per check."""
    prob, _, _ = _build(cfg)
    rng = np.random.default_rng(cfg["seed"])
    checks = []

    X = prob.domain.sample_interior(10000, rng)
    rep = coercivity_check(prob.system, X)
    checks.append(("coercivity",
                   rep.ok and rep.mu0_empirical >= prob.system.mu0 - 1e-9,
                   f"empirical mu0 = {rep.mu0_empirical:.4f}"))

    sd = symmetry_defect(prob.system, X)
    checks.append(("coefficient-symmetry", sd <= 1e-12, f"max defect {sd:.2e}"))

    closure = prob.exact_system if prob.exact_system is not None else prob.exact
    dn = dual_norm_residual(prob.system, closure, prob.oracle_basis(),
                            prob.oracle_quadrature())
    checks.append(("dual-norm-at-exact", dn <= 1e-6, f"residual {dn:.2e}"))

    square = Hypercube([-1.0, -1.0], [1.0, 1.0])
    from .systems import advection_system
    sys2 = advection_system(d=2, beta=[1.0, 0.9], mu=1.0,
                            f=lambda c: 0.0 * c[0], mu0=1.0)
    ibp = integration_by_parts_residual(
        sys2, lambda c: c[0] * c[0] * c[1] + 0.5 * c[1],
        lambda c: c[0] * c[1] * c[1] - 2.0 * c[0],
        square.quadrature(12), square.boundary_quadrature(12))
    checks.append(("integration-by-parts", ibp <= 1e-8, f"residual {ibp:.2e}"))

    sol = prob.build_solution_net(8, seed=rng.integers(2**31))
    test = prob.build_test_net(8, seed=rng.integers(2**31))
    Xb, nb, idx, names = prob.domain.sample_boundary(10000, rng)
    smask = np.array([n in set(prob.classification.solution_pieces) for n in names])[idx]
    tmask = np.array([n in set(prob.classification.test_pieces) for n in names])[idx]
    rs = prob.solution_bc_residual(sol, Xb[smask], nb[smask]).max() if smask.any() else 0.0
    rt = prob.test_bc_residual(test, Xb[tmask], nb[tmask]).max() if tmask.any() else 0.0
    checks.append(("solution-boundary-encoding", rs <= 1e-10, f"max mismatch {rs:.2e}"))
    checks.append(("test-boundary-encoding", rt <= 1e-10, f"max mismatch {rt:.2e}"))

    ok_all = True
    report = {}
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        report[name] = {"ok": bool(ok), "detail": detail}
        ok_all &= ok
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    _atomic_json(os.path.join(out, "verify_report.json"), report)
    return 0 if ok_all else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="friedrichs",
        description="Mesh-free weak solutions of Friedrichs-type PDE systems "
                    "by adversarial minimax training.")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--preset", choices=PRESET_NAMES)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--iters", type=int, help="outer iterations (train.n)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--mode", choices=_MODES)
    parser.add_argument("--workers", type=int,
                        help="accepted for interface compatibility; runs are "
                             "single-process and seed-deterministic")
    parser.add_argument("--checkpoint", help="checkpoint for evaluate mode")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)

    try:
        cfg = _resolve(args)
        if cfg["mode"] == "train":
            return cmd_train(cfg)
        if cfg["mode"] == "baseline":
            return cmd_train(cfg, baseline=True)
        if cfg["mode"] == "evaluate":
            return cmd_evaluate(cfg)
        return cmd_verify(cfg)
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
