import json

import numpy as np
import pytest

from entangled.cli import DEFAULT_CONFIG, load_config, main
from entangled.grid import Grid1D, SampledField2D, read_field, write_field


def run_cli(tmp_path, *args, name="report.json"):
    out = tmp_path / name
    status = main([*args, "--out", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return status, report


@pytest.fixture
def stored_field(tmp_path):
    g = Grid1D(8.0, 16)
    x, y = g.mesh()
    F = SampledField2D(g, np.exp(-(x**2 + y**2) / 4) * (1 + 0.3 * np.sin(x)), real=True)
    path = tmp_path / "f.ef2d"
    write_field(path, F)
    return path, F


def test_eval_form_product_of_stored_field(tmp_path, stored_field):
    path, F = stored_field
    status, rep = run_cli(tmp_path, "eval-form", "--fields", str(path), "--symbol", "one")
    assert status == 0
    assert rep["command"] == "eval-form" and set(rep) >= {"command", "config", "results", "ledger"}
    expected = float(np.sum(F.values**4)) * F.grid.spacing**2
    assert rep["results"][0]["value"] == pytest.approx(expected, abs=1e-12)
    assert rep["config"]["grid"] == {"L": 8.0, "N": 16}


def test_reports_byte_identical(tmp_path):
    args = ["eval-form", "--N", "16", "--L", "8", "--seed", "3"]
    main([*args, "--out", str(tmp_path / "a.json")])
    main([*args, "--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_echoed_and_overridable(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"N": 16, "L": 8.0}, "seed": 4}))
    status, rep = run_cli(tmp_path, "eval-tp", "--config", str(cfg), "--set", "seed=5")
    assert status == 0
    assert rep["config"]["seed"] == 5 and rep["config"]["grid"]["N"] == 16
    assert rep["config"]["quadrature"] == DEFAULT_CONFIG["quadrature"]


@pytest.mark.parametrize("args", [
    ["eval-form", "--set", "bogus=1"],
    ["eval-form", "--fields", "missing.ef2d"],
    ["eval-form", "--symbol", "no-such-symbol"],
    ["nonsense"],
    ["eval-form", "--N", "not-a-number"],
])
def test_usage_errors_exit_2(tmp_path, args):
    assert main(args) == 2


def test_malformed_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["eval-form", "--config", str(cfg)]) == 2


def test_load_config_rejects_unknown_nested_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"K": 3}}))
    with pytest.raises(Exception, match="unknown config key"):
        load_config(str(cfg))


def test_replay_negative_control_exit_1(tmp_path, capsys):
    status, rep = run_cli(tmp_path, "replay-proof", "--N", "16", "--L", "8", "--negative-control",
                          "--set", "replay.spatial=false", "--set", "inputs.band=4")
    assert status == 1
    assert rep["failed"] and all(f.startswith("telescope") for f in rep["failed"])
    assert "verification failed at telescope" in capsys.readouterr().err


def test_replay_passes_and_reports_uniformity(tmp_path):
    status, rep = run_cli(tmp_path, "replay-proof", "--N", "16", "--L", "8", "--set", "inputs.band=4",
                          "--set", "windows.u=[0, 1]", "--set", "replay.spatial=false")
    assert status == 0 and rep["failed"] == []
    labels = [r["label"] for r in rep["results"]]
    assert labels.count("proof replay") == 2 and "(u, v) uniformity" in labels
    assert all({"step", "label", "left", "right", "slack"} <= set(e) for e in rep["ledger"])


def test_verify_telescoping(tmp_path):
    status, rep = run_cli(tmp_path, "verify-telescoping", "--N", "16", "--L", "8", "--set", "inputs.band=4",
                          "--out-dir", str(tmp_path / "o"))
    assert status == 0
    assert (tmp_path / "o" / "telescoping_scales.csv").exists()
    steps = {e["step"] for e in rep["ledger"]}
    assert {"pair certificate", "telescoping identity", "fundamental theorem"} <= steps


def test_probe_norm_dumps_argmax(tmp_path):
    out = tmp_path / "o"
    status, rep = run_cli(tmp_path, "probe-norm", "--N", "16", "--L", "8", "--set", "probe.band=4",
                          "--starts", "2", "--max-iter", "5", "--out-dir", str(out))
    assert status == 0
    res = rep["results"][0]
    assert res["argmax_files"] == [f"argmax_F{j}.ef2d" for j in range(1, 5)]
    F = read_field(out / "argmax_F1.ef2d")
    assert F.grid == Grid1D(8.0, 16)
    assert res["best"] >= max(res["trace"])


def test_bump_check_and_csv(tmp_path):
    status, rep = run_cli(tmp_path, "bump-check", "--out-dir", str(tmp_path / "o"))
    assert status == 0
    assert rep["results"][0]["f(2)"] == 1.0
    assert (tmp_path / "o" / "bump.csv").read_text().startswith("x,f,f_sqrt,h,h_sqrt")


def test_decompose(tmp_path):
    status, rep = run_cli(tmp_path, "decompose", "--set", "decompose.scales=3")
    assert status == 0
    certs = rep["results"][3]["certificates"]
    assert len(certs) == 3 and all(np.isfinite(certs))


@pytest.mark.parametrize("verb", ["eval-dyadic", "eval-triangular"])
def test_other_evaluators(tmp_path, verb):
    status, rep = run_cli(tmp_path, verb, "--N", "8", "--L", "4", "--set", "inputs.band=2")
    assert status == 0 and isinstance(rep["results"][0]["value"], float)


def test_selftest_subset(tmp_path):
    status, rep = run_cli(tmp_path, "selftest", "--criteria", "2", "11")
    assert status == 0
    assert [r["criterion"] for r in rep["results"]] == [2, 11]
    assert all(r["passed"] for r in rep["results"])
