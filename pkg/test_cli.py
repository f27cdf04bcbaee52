#!/usr/bin/env python3
"""End-to-end tests of the gfnoma command line through cli_dispatch."""

import io
import json

import pytest
from rich.console import Console

from engine.debug import DebugManager, parse_debug_setting
from engine.renderer import Renderer
from main import cli_dispatch


def run(argv):
    buffer = io.StringIO()
    renderer = Renderer(Console(file=buffer, width=160, force_terminal=False))
    code = cli_dispatch(argv, renderer)
    return code, buffer.getvalue()


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


TINY_SCENARIO = {
    "scenario_id": "tiny",
    "k": 4,
    "T": 2,
    "detectors": ["bma", "mld"],
    "ebn0_grid_db": [2, "inf"],
    "trials_per_point": 60,
    "min_error_events": 0,
}


def test_usage_errors_exit_one(tmp_path):
    assert run([])[0] == 1
    assert run(["no-such-command"])[0] == 1
    assert run(["--config", str(tmp_path / "missing.json"), "bler"])[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["--config", str(bad), "bler"])[0] == 1
    assert run(["--preset", "nope", "zc-analyze"])[0] == 1
    assert run(["--config", write_config(tmp_path, {"plots": {}}), "bler"])[0] == 1


def test_field_check():
    code, out = run(["field-check", "--k", "4"])
    assert code == 0
    assert "ok" in out
    assert run(["field-check"])[0] == 0
    assert run(["field-check", "--k", "0"])[0] == 1
    assert run(["field-check", "--k", "17"])[0] == 1


def test_detect_noiseless_block():
    code, out = run(["--preset", "quick", "detect", "--messages", "3,7"])
    assert code == 0
    assert "decoded [3, 7]" in out


def test_detect_rejects_bad_messages():
    assert run(["--preset", "quick", "detect", "--messages", "0,3"])[0] == 1
    assert run(["--preset", "quick", "detect", "--messages", "4,4"])[0] == 1
    assert run(["--preset", "quick", "detect", "--messages", "a,b"])[0] == 1


def test_zc_analyze(tmp_path):
    code, out = run(["--config", write_config(tmp_path, {"zc": {"q": 13, "u": 1, "u_cross": 3}}), "zc-analyze"])
    assert code == 0
    assert "autocorrelation peak" in out
    assert run(["--config", write_config(tmp_path, {"zc": {"q": 12}}, "even.json"), "zc-analyze"])[0] == 2


def test_bler_outputs_are_reproducible(tmp_path):
    cfg = write_config(tmp_path, {"scenario": TINY_SCENARIO})
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(["--config", cfg, "--seed", "7", "--out", str(first), "bler"])[0] == 0
    assert run(["--config", cfg, "--seed", "7", "--out", str(second), "bler"])[0] == 0
    csv_a = (first / "tiny_bler.csv").read_bytes()
    assert csv_a == (second / "tiny_bler.csv").read_bytes()
    assert (first / "tiny_bler.plot.py").is_file()
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["command"] == "bler"
    assert manifest["seed"] == 7
    assert "tiny_bler.csv" in manifest["files"]


def test_train_then_sweep_with_the_checkpoint(tmp_path):
    checkpoint = tmp_path / "m.npz"
    train = {"k": 3, "T": 2, "hidden_widths": [8], "epochs": 2, "minibatch_size": 32,
             "train_size": 64, "val_size": 32, "learning_rate": 1e-3, "checkpoint": str(checkpoint)}
    scenario = dict(TINY_SCENARIO, k=3, detectors=["bma", "dl"], dl_model=str(checkpoint), trials_per_point=20)
    cfg = write_config(tmp_path, {"train": train, "scenario": scenario})
    out = tmp_path / "out"
    assert run(["--config", cfg, "--out", str(out), "train"])[0] == 0
    assert checkpoint.is_file()
    assert (out / "loss_trace.csv").is_file()
    assert run(["--config", cfg, "--out", str(out), "bler"])[0] == 0


def test_missing_checkpoint_is_a_config_error(tmp_path):
    scenario = dict(TINY_SCENARIO, detectors=["dl"], dl_model=str(tmp_path / "absent.npz"))
    code, out = run(["--config", write_config(tmp_path, {"scenario": scenario}), "--out", str(tmp_path), "bler"])
    assert code == 1
    assert "checkpoint not found" in out


def test_power_opt_with_round_simulation(tmp_path):
    cfg = write_config(tmp_path, {
        "power": {"k": 4, "T": 2, "p_max": 100.0, "noise_var": 0.1, "load": [2, 2], "trials": 10, "levels": 3},
        "multilayer": {"rounds": 20, "arrival_rate": 2.0, "p_max_tx": 500.0},
    })
    code, _ = run(["--config", cfg, "--out", str(tmp_path / "out"), "power-opt"])
    assert code == 0
    lines = (tmp_path / "out" / "power_grid.csv").read_text().splitlines()
    assert len(lines) == 1 + 3
    assert (tmp_path / "out" / "power_grid.plot.py").is_file()


def test_power_opt_accepts_infinite_transmit_power(tmp_path):
    power = {"k": 4, "T": 2, "p_max": 100.0, "noise_var": 0.1, "load": [2, 2], "trials": 10, "levels": 3}
    cfg = write_config(tmp_path, {"power": power, "multilayer": {"rounds": 10, "p_max_tx": "inf"}})
    assert run(["--config", cfg, "--out", str(tmp_path / "out"), "power-opt"])[0] == 0
    bad = write_config(tmp_path, {"power": power, "multilayer": {"rounds": 10, "p_max_tx": "lots"}}, "bad.json")
    code, out = run(["--config", bad, "--out", str(tmp_path / "out"), "power-opt"])
    assert code == 1
    assert "p_max_tx" in out


def test_sysim_command(tmp_path):
    cfg = write_config(tmp_path, {"sysim": {
        "frame_count": 100,
        "partitions": [{"cluster_id": "u", "gfru_count": 2, "signature_pool_size": 15, "capability": 2,
                        "rate": 2.0}],
    }})
    code, out = run(["--config", cfg, "--out", str(tmp_path / "out"), "sysim"])
    assert code == 0
    assert "analytic success probability" in out
    assert (tmp_path / "out" / "sysim.csv").is_file()


def test_unwritable_output_is_a_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path, {"sysim": {
        "frame_count": 5,
        "partitions": [{"cluster_id": "u", "gfru_count": 1, "signature_pool_size": 15, "capability": 2}],
    }})
    assert run(["--config", cfg, "--out", str(blocker / "sub"), "sysim"])[0] == 2


def test_debug_tag_filter():
    assert parse_debug_setting("0") is None
    assert parse_debug_setting("1") == frozenset()
    assert parse_debug_setting("sic, power") == {"SIC", "POWER"}
    try:
        DebugManager.enable({"SIC"})
        assert DebugManager.wants("[SIC] layer 1 failed")
        assert not DebugManager.wants("[SWEEP] stop at trial 10")
        DebugManager.enable()
        assert DebugManager.wants("[SWEEP] stop at trial 10")
        DebugManager.toggle()
        assert not DebugManager.is_enabled()
    finally:
        DebugManager.disable()


def test_debug_flag_runs_the_command():
    try:
        assert run(["--debug", "field-check", "--k", "3"])[0] == 0
        assert DebugManager.is_enabled()
    finally:
        DebugManager.disable()


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
