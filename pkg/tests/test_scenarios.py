"""Scenario runner and command line behavior."""

import filecmp
import json
import math

import numpy as np
import pytest

from sqzsim.cli import ENV_OUTPUT_DIR, main
from sqzsim.pump import Calibration
from sqzsim.scenarios import (
    SCENARIO_DEFAULTS,
    SCENARIOS,
    ScenarioConfig,
    UsageError,
    config_fingerprint,
    load_calibration,
    resolve_params,
    run_scenario,
)


def test_scenario_defaults_cover_all_scenarios():
    assert set(SCENARIO_DEFAULTS) == set(SCENARIOS)


def test_resolve_params_coerces_override_strings():
    params = resolve_params("spectrum", {"pump_power_mw": "3.25", "n_samples": "2048"})
    assert params["pump_power_mw"] == 3.25
    assert isinstance(params["n_samples"], int)
    assert params["n_samples"] == 2048
    assert params["loss"] == 0.183


def test_resolve_params_coerces_booleans():
    assert resolve_params("tm_squeezing", {"project": "false"})["project"] is False
    assert resolve_params("tm_squeezing", {"project": "1"})["project"] is True
    with pytest.raises(UsageError):
        resolve_params("tm_squeezing", {"project": "maybe"})


def test_resolve_params_rejects_unknown_keys():
    with pytest.raises(UsageError, match="known keys"):
        resolve_params("spectrum", {"bogus": "1"})
    with pytest.raises(UsageError, match="scenario"):
        resolve_params("nonsense", {})


def test_scenario_config_validation(tmp_path):
    with pytest.raises(UsageError):
        ScenarioConfig(scenario="warp", output_dir=str(tmp_path))
    with pytest.raises(UsageError):
        ScenarioConfig(scenario="spectrum", n_frames=0, output_dir=str(tmp_path))


def test_config_fingerprint_tracks_inputs():
    cal = Calibration()
    cfg_a = ScenarioConfig(scenario="calibrate", seed=1, output_dir="x")
    cfg_b = ScenarioConfig(scenario="calibrate", seed=2, output_dir="x")
    pa = resolve_params("calibrate", {})
    fa = config_fingerprint(cfg_a, pa, cal)
    assert fa == config_fingerprint(cfg_a, pa, cal)
    assert fa != config_fingerprint(cfg_b, pa, cal)
    pb = resolve_params("calibrate", {"n_gain_points": "13"})
    assert fa != config_fingerprint(cfg_a, pb, cal)
    assert len(fa) == 64


def test_calibrate_scenario_end_to_end(tmp_path):
    cfg = ScenarioConfig(scenario="calibrate", seed=0, output_dir=str(tmp_path))
    run = run_scenario(cfg)
    assert run.exit_code == 0
    assert run.manifest["all_passed"]
    names = set(run.manifest["outputs"].values())
    assert {"calibration.json", "gain_points.csv", "quadratic_points.csv", "manifest.json"} <= names
    cal = load_calibration(tmp_path / "calibration.json")
    assert cal.quad_coeff == pytest.approx(253.90625, rel=1e-9)
    assert cal.gain_coeff == pytest.approx(0.12237657819075765, rel=1e-9)


def test_manifest_records_config_and_versions(tmp_path):
    cfg = ScenarioConfig(scenario="calibrate", seed=3, output_dir=str(tmp_path))
    run = run_scenario(cfg)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["scenario"] == "calibrate"
    assert man["seed"] == 3
    assert man["outputs"]["manifest"] == "manifest.json"
    for fname in man["outputs"].values():
        assert (tmp_path / fname).exists()
    assert {"numpy", "scipy", "python", "sqzsim"} <= set(man["versions"])
    cal = load_calibration(tmp_path / "calibration.json")
    params = resolve_params("calibrate", {})
    assert man["config_sha256"] == config_fingerprint(cfg, params, cal)


def test_outputs_embed_seed_and_config_hash(tmp_path):
    cfg = ScenarioConfig(scenario="calibrate", seed=11, output_dir=str(tmp_path))
    run = run_scenario(cfg)
    sha = run.manifest["config_sha256"]
    for name in run.manifest["outputs"].values():
        text = (tmp_path / name).read_text()
        assert "seed" in text
        assert sha in text


def test_load_calibration_errors(tmp_path):
    with pytest.raises(UsageError, match="calibration"):
        load_calibration(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(UsageError):
        load_calibration(bad)
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"quad_coeff_mw_per_v2": 250.0}))
    with pytest.raises(UsageError):
        load_calibration(incomplete)


def test_spectrum_reruns_are_byte_identical(tmp_path):
    overrides = {"n_samples": "1024"}
    dirs = []
    for name in ("a", "b"):
        cfg = ScenarioConfig(
            scenario="spectrum",
            seed=5,
            n_frames=120,
            output_dir=str(tmp_path / name),
            overrides=overrides,
        )
        run = run_scenario(cfg)
        assert run.exit_code == 0
        dirs.append(tmp_path / name)
    left = sorted(p.name for p in dirs[0].iterdir())
    right = sorted(p.name for p in dirs[1].iterdir())
    assert left == right
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], left, shallow=False)
    assert mismatch == [] and errors == []


def test_infeasible_program_is_usage_error(tmp_path):
    cfg = ScenarioConfig(
        scenario="tm_squeezing",
        n_frames=10,
        output_dir=str(tmp_path),
        overrides={"slot_dbs": "9.0", "slot_quadratures": "x"},
    )
    with pytest.raises(UsageError, match="mW"):
        run_scenario(cfg)


def test_cli_calibrate_run(tmp_path, capsys):
    code = main(["run", "calibrate", "--out", str(tmp_path), "--seed", "2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "[pass]" in out
    assert "calibrate: wrote" in out
    man = json.loads((tmp_path / "calibrate" / "manifest.json").read_text())
    assert man["seed"] == 2


def test_cli_unknown_scenario_exits_2(tmp_path, capsys):
    code = main(["run", "quantum_teleport", "--out", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 2
    err = json.loads(captured.err)
    assert err["exit_code"] == 2
    assert err["error"]["kind"] == "usage"
    on_disk = json.loads((tmp_path / "quantum_teleport" / "error.json").read_text())
    assert on_disk == err


def test_cli_bad_set_syntax_exits_2(tmp_path, capsys):
    code = main(["run", "calibrate", "--out", str(tmp_path), "--set", "loss0.2"])
    assert code == 2
    assert "key=value" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_cli_unknown_param_exits_2(tmp_path, capsys):
    code = main(["run", "calibrate", "--out", str(tmp_path), "--set", "bogus=1"])
    assert code == 2
    capsys.readouterr()


def test_cli_unreadable_config_exits_2(tmp_path, capsys):
    code = main(["run", "calibrate", "--config", str(tmp_path / "nope.json")])
    assert code == 2
    assert "unreadable config" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_cli_config_file_drives_run(tmp_path, capsys):
    cal_dir = tmp_path / "calout"
    assert main(["run", "calibrate", "--out", str(cal_dir)]) == 0
    capsys.readouterr()
    config = {
        "seed": 9,
        "n_frames": 40,
        "output_dir": str(tmp_path / "runs"),
        "calibration_path": str(cal_dir / "calibrate" / "calibration.json"),
        "params": {"n_samples": 512},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    code = main(["run", "spectrum", "--config", str(cfg_path)])
    capsys.readouterr()
    assert code == 0
    man = json.loads((tmp_path / "runs" / "spectrum" / "manifest.json").read_text())
    assert man["seed"] == 9
    assert man["n_frames"] == 40
    assert man["params"]["n_samples"] == 512


def test_cli_rejects_unknown_config_keys(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"frames": 10}))
    code = main(["run", "calibrate", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert code == 2
    assert "unknown config keys" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_cli_env_var_sets_output_base(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "envbase"))
    code = main(["run", "calibrate"])
    capsys.readouterr()
    assert code == 0
    assert (tmp_path / "envbase" / "calibrate" / "manifest.json").exists()


def test_cli_out_flag_beats_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "envbase"))
    code = main(["run", "calibrate", "--out", str(tmp_path / "flagbase")])
    capsys.readouterr()
    assert code == 0
    assert (tmp_path / "flagbase" / "calibrate" / "manifest.json").exists()
    assert not (tmp_path / "envbase").exists()


def test_cli_reports_failed_checks_with_exit_1(tmp_path, capsys, monkeypatch):
    from sqzsim import scenarios as sc

    def failing_runner(cfg, params, cal, outdir, meta):
        checks = [{"name": "always_down", "passed": False, "detail": "synthetic"}]
        return {}, {}, checks

    monkeypatch.setitem(sc._RUNNERS, "calibrate", failing_runner)
    code = main(["run", "calibrate", "--out", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 1
    assert "[FAIL] always_down" in captured.out
    err = json.loads(captured.err)
    assert err["error"]["kind"] == "invariant"
    assert (tmp_path / "calibrate" / "error.json").exists()


def test_tm_squeezing_slot_parsing_errors(tmp_path):
    cfg = ScenarioConfig(
        scenario="tm_squeezing",
        n_frames=10,
        output_dir=str(tmp_path),
        overrides={"slot_dbs": "1.0,2.0", "slot_quadratures": "x"},
    )
    with pytest.raises(UsageError):
        run_scenario(cfg)
    cfg = ScenarioConfig(
        scenario="tm_squeezing",
        n_frames=10,
        output_dir=str(tmp_path),
        overrides={"slot_dbs": "1.0", "slot_quadratures": "q"},
    )
    with pytest.raises(UsageError):
        run_scenario(cfg)


def test_epr_scenario_smoke(tmp_path):
    cfg = ScenarioConfig(
        scenario="epr",
        seed=1,
        n_frames=120,
        output_dir=str(tmp_path),
        overrides={"scan_halfwidth_s": "4e-9"},
    )
    run = run_scenario(cfg)
    report = json.loads((tmp_path / "epr_report.json").read_text())
    assert report["n_frames"] == 120
    assert report["duan"] > 0.0
    assert "advisories" in report
    scan = (tmp_path / "epr_scan.csv").read_text().splitlines()
    header_idx = next(i for i, ln in enumerate(scan) if not ln.startswith("#"))
    assert scan[header_idx] == "offset_s,duan,duan_predicted"
    assert len(scan) - header_idx - 1 == 9


def test_waveforms_scenario_smoke(tmp_path):
    cfg = ScenarioConfig(
        scenario="waveforms",
        seed=2,
        n_frames=40,
        output_dir=str(tmp_path),
        overrides={"duration_s": "600e-9", "square_half_period_s": "150e-9",
                   "step_time_s": "200e-9"},
    )
    run = run_scenario(cfg)
    names = set(run.manifest["outputs"].values())
    assert {"square_pump.csv", "square_variance.csv", "step_pump.csv"} <= names
    # the step program gets no variance trace, everything else does
    assert "step_variance.csv" not in names
    text = (tmp_path / "square_variance.csv").read_text().splitlines()
    header = next(ln for ln in text if not ln.startswith("#"))
    assert "quasi_static_variance" in header
