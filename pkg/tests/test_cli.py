"""Command line interface: artifacts, determinism, verification, errors."""

import json
import os

import numpy as np
import pytest

from friedrichs.cli import load_config, main
from friedrichs.metrics import read_history_csv


def run_cli(*argv):
    return main(list(argv))


def test_train_smoke_produces_artifacts(tmp_path):
    out = tmp_path / "run"
    code = run_cli("--preset", "advection-fan", "--iters", "10", "--seed", "1",
                   "--out", str(out), "--config", _quick_cfg(tmp_path))
    assert code == 0
    rows = read_history_csv(str(out / "history.csv"))
    assert 1 <= len(rows) <= 10
    assert (out / "solution.ckpt").exists()
    assert (out / "test.ckpt").exists()
    assert (out / "field.csv").exists()
    metrics = json.loads((out / "metrics.json").read_text())
    assert np.isfinite(metrics["e_L2"])
    config = json.loads((out / "config.json").read_text())
    assert config["preset"] == "advection-fan"
    header = (out / "field.csv").read_text().splitlines()[0]
    assert header == "x0,x1,value"


def _quick_cfg(tmp_path, **train_overrides):
    train = dict(N=64, N_b=32, m_s=6, m_t=6, eta_s0=1e-3, eta_t0=1e-3,
                 eval_every=5, n_test_points=200)
    train.update(train_overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"train": train}))
    return str(path)


def test_evaluate_reproduces_metrics(tmp_path):
    out = tmp_path / "run"
    assert run_cli("--preset", "advection-fan", "--iters", "6", "--seed", "2",
                   "--out", str(out), "--config", _quick_cfg(tmp_path)) == 0
    stored = json.loads((out / "metrics.json").read_text())

    out2 = tmp_path / "eval"
    assert run_cli("--preset", "advection-fan", "--mode", "evaluate",
                   "--checkpoint", str(out / "solution.ckpt"),
                   "--out", str(out2), "--config", _quick_cfg(tmp_path)) == 0
    replayed = json.loads((out2 / "metrics.json").read_text())
    assert abs(replayed["e_L2"] - stored["e_L2"]) <= 1e-12


def test_verify_mode_emits_pass_lines(tmp_path, capsys):
    code = run_cli("--mode", "verify", "--preset", "advection-discontinuous",
                   "--out", str(tmp_path / "v"), "--seed", "0")
    captured = capsys.readouterr().out
    assert code == 0
    assert "PASS coercivity" in captured
    assert "PASS integration-by-parts" in captured
    assert "PASS dual-norm-at-exact" in captured
    assert "PASS solution-boundary-encoding" in captured
    assert "FAIL" not in captured
    report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    assert all(entry["ok"] for entry in report.values())


@pytest.mark.parametrize("name", ["advection-winding", "maxwell-cube"])
def test_verify_other_presets(tmp_path, name):
    assert run_cli("--mode", "verify", "--preset", name,
                   "--out", str(tmp_path / name)) == 0


def test_baseline_mode_runs(tmp_path):
    out = tmp_path / "base"
    code = run_cli("--preset", "advection-fan", "--mode", "baseline",
                   "--iters", "6", "--out", str(out),
                   "--config", _quick_cfg(tmp_path))
    assert code == 0
    assert (out / "solution.ckpt").exists()
    assert not (out / "test.ckpt").exists()


def test_unknown_config_keys_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"trian": {"n": 5}}))
    with pytest.raises(Exception):
        load_config(str(path))
    assert run_cli("--config", str(path), "--preset", "advection-fan") == 2

    path2 = tmp_path / "bad2.json"
    path2.write_text(json.dumps({"train": {"iterations": 5}}))
    assert run_cli("--config", str(path2), "--preset", "advection-fan") == 2


def test_missing_preset_is_an_error():
    assert main([]) == 2


def test_geometry_override_via_config(tmp_path):
    cfg = {"train": dict(N=64, N_b=32, m_s=5, m_t=5, eval_every=5,
                         n_test_points=100),
           "geometry": {"holes": [[0.5, 0.5, 0.12]]}}
    path = tmp_path / "geo.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "wave"
    code = run_cli("--preset", "wave-complex-domain", "--iters", "4",
                   "--out", str(out), "--config", str(path))
    assert code == 0


def test_workers_flag_accepted(tmp_path):
    code = run_cli("--preset", "advection-fan", "--iters", "4", "--workers", "4",
                   "--out", str(tmp_path / "w"), "--config", _quick_cfg(tmp_path))
    assert code == 0


def test_nan_abort_retains_last_checkpoint(tmp_path, monkeypatch):
    # when the loss blows up mid-run the exit code is 3 and the rolling
    # checkpoint from the last evaluation point stays on disk
    import friedrichs.cli as cli_mod
    from friedrichs.losses import NonFiniteLossError
    from friedrichs.training import train as real_train

    def train_then_explode(prob, train_cfg, loss_cfg=None, on_eval=None):
        real_train(prob, train_cfg, loss_cfg, on_eval=on_eval)
        raise NonFiniteLossError("synthetic blow-up")

    monkeypatch.setattr(cli_mod, "train", train_then_explode)
    out = tmp_path / "aborted"
    code = run_cli("--preset", "advection-fan", "--iters", "6", "--seed", "1",
                   "--out", str(out), "--config", _quick_cfg(tmp_path))
    assert code == 3
    assert (out / "solution.ckpt").exists()
    assert (out / "history.csv").exists()
