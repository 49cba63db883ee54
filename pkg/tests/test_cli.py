import json

import numpy as np
import pytest

from mcflab import cli
from mcflab.cli import (EXIT_CONFIG, EXIT_OK, EXIT_PINCH, ConfigError,
                        build_initial_state, load_config, main)


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def test_load_config_defaults(tmp_path):
    path = _write_config(tmp_path, {"scenario": "cylinder"})
    cfg = load_config(path)
    assert cfg["truncation"] == {"n_y": 24, "k_omega": 4}
    assert cfg["stepper"]["scheme"] == "etdrk2"
    assert cfg["seed"] == 0


def test_load_config_unknown_field_names_it(tmp_path):
    path = _write_config(tmp_path,
                         {"scenario": "cylinder",
                          "stepper": {"stepsize": 1e-3}})
    with pytest.raises(ConfigError, match="stepper.stepsize"):
        load_config(path)


def test_load_config_range_check_names_field(tmp_path):
    path = _write_config(tmp_path,
                         {"scenario": "cylinder",
                          "truncation": {"n_y": 1000}})
    with pytest.raises(ConfigError, match="truncation.n_y"):
        load_config(path)


def test_load_config_rejects_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_load_config_requires_scenario(tmp_path):
    path = _write_config(tmp_path, {"stepper": {}})
    with pytest.raises(ConfigError, match="scenario"):
        load_config(path)


# ---------------------------------------------------------------------------
# Scenario construction
# ---------------------------------------------------------------------------

def _cfg(scenario, **over):
    cfg = {"scenario": scenario,
           "truncation": dict(cli._DEFAULTS["truncation"]),
           "stepper": dict(cli._DEFAULTS["stepper"]),
           "decomposition": dict(cli._DEFAULTS["decomposition"]),
           "seed": 0}
    for key, val in over.items():
        cfg[key].update(val)
    return cfg


def test_scenario_cylinder():
    state, gauge = build_initial_state(_cfg("cylinder"))
    assert state.xi.norm() == 0.0
    assert state.axis.is_zero()
    assert gauge == [(0, 0, 1), (1, 0, 1)]


def test_scenario_nondegenerate():
    state, _ = build_initial_state(_cfg({"name": "nondegenerate",
                                         "b0": 0.05}))
    assert state.xi.coeffs[2, 0] == 0.05
    with pytest.raises(ConfigError, match="b0"):
        build_initial_state(_cfg({"name": "nondegenerate"}))


def test_scenario_degenerate_gauges_slow_modes():
    state, gauge = build_initial_state(_cfg({"name": "degenerate", "m": 4,
                                             "amplitude": 0.01}))
    assert state.xi.coeffs[4, 0] == 0.01
    assert gauge == [(0, 0, 1), (1, 0, 1), (2, 0, 1), (3, 0, 1)]
    with pytest.raises(ConfigError, match="m"):
        build_initial_state(_cfg({"name": "degenerate", "m": 99,
                                  "amplitude": 0.01}))


def test_scenario_curved_axis():
    state, _ = build_initial_state(
        _cfg({"name": "curved_axis", "axis": {"2": [1e-3, 0, 0, 0]}}))
    assert state.axis.degree == 2
    with pytest.raises(ConfigError, match="axis"):
        build_initial_state(_cfg({"name": "curved_axis"}))


def test_scenario_custom_round_trip(tmp_path):
    from mcflab.field import get_basis, save_field, zero_field
    fld = zero_field(8, 2)
    fld.coeffs[3, 0] = 0.02
    path = tmp_path / "seed.field"
    save_field(path, fld, 0.0, get_basis(8, 2))
    state, _ = build_initial_state(
        _cfg({"name": "custom", "field": str(path)}))
    assert state.xi.coeffs[3, 0] == 0.02
    with pytest.raises(ConfigError, match="truncation"):
        cfg = _cfg({"name": "custom", "field": str(path)})
        cfg["truncation"] = {"n_y": 6, "k_omega": 1}
        build_initial_state(cfg)


def test_scenario_unknown_name():
    with pytest.raises(ConfigError, match="unknown scenario"):
        build_initial_state(_cfg("warp"))


# ---------------------------------------------------------------------------
# Commands end to end (in-process through main())
# ---------------------------------------------------------------------------

def test_run_cylinder_produces_artifacts(tmp_path):
    config = _write_config(tmp_path, {
        "scenario": "cylinder",
        "truncation": {"n_y": 8, "k_omega": 0},
        "stepper": {"h": 1e-2, "tau_end": 0.2, "stride": 0.1},
    })
    out = tmp_path / "run"
    code = main(["run", "--config", config, "--out", str(out)])
    assert code == EXIT_OK
    for name in ("config.json", "trajectory.csv", "events.log",
                 "classification.json"):
        assert (out / name).exists(), name
    assert list((out / "snapshots").iterdir())
    report = json.loads((out / "classification.json").read_text())
    # the horizon is too short for a verdict; a plateau report is written
    assert report["verdict"] == "Unavailable"
    assert "plateau_report" in report


def test_run_bad_config_exits_2(tmp_path, capsys):
    config = _write_config(tmp_path, {"scenario": "nope"})
    code = main(["run", "--config", config, "--out", str(tmp_path / "r")])
    assert code == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_run_pinch_exits_3(tmp_path):
    from mcflab.field import get_basis, save_field, zero_field
    fld = zero_field(8, 0)
    fld.coeffs[0, 0] = -5.0
    fld.coeffs[2, 0] = -0.5
    seedpath = tmp_path / "seed.field"
    save_field(seedpath, fld, 0.0, get_basis(8, 0))
    config = _write_config(tmp_path, {
        "scenario": {"name": "custom", "field": str(seedpath), "gauge": []},
        "truncation": {"n_y": 8, "k_omega": 0},
        "stepper": {"h": 1e-2, "tau_end": 5.0},
    })
    out = tmp_path / "run"
    code = main(["run", "--config", config, "--out", str(out)])
    assert code == EXIT_PINCH
    assert any("pinch" in line
               for line in (out / "events.log").read_text().splitlines())


def test_classify_command(tmp_path):
    taus = np.arange(0.0, 30.0, 0.1)
    a2 = 1.0 / (1.0 / 0.05 + taus / 3.0)
    path = tmp_path / "trajectory.csv"
    with open(path, "w") as fh:
        fh.write("tau, alpha_2_0_1\n")
        for tv, av in zip(taus, a2):
            fh.write("%.17g, %.17g\n" % (tv, av))
    out = tmp_path / "classification.json"
    code = main(["classify", str(path), "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["verdict"] == "Nondegenerate"


def test_classify_empty_and_malformed(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("tau, alpha_2_0_1\n")
    assert main(["classify", str(empty)]) == EXIT_CONFIG
    assert "empty" in capsys.readouterr().err

    bad = tmp_path / "bad.csv"
    bad.write_text("tau, alpha_2_0_1\n0.0, 0.05\n0.1, oops\n")
    assert main(["classify", str(bad)]) == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_verify_unknown_suite(capsys):
    assert main(["verify", "bogus"]) == EXIT_CONFIG
    assert "unknown suite" in capsys.readouterr().err


def test_verify_basis_suite(capsys):
    assert main(["verify", "basis"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "eigenvalue residual" in out and "FAIL" not in out


def test_propagator_command(tmp_path, capsys):
    out = tmp_path / "decay_report.csv"
    code = main(["propagator", "--n", "2", "--potential", "drift",
                 "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2 and "drift" in lines[1]
    assert main(["propagator", "--n", "2", "--potential", "nope"]) \
        == EXIT_CONFIG


def test_run_determinism(tmp_path):
    config = _write_config(tmp_path, {
        "scenario": {"name": "degenerate", "m": 3, "amplitude": 1e-3},
        "truncation": {"n_y": 8, "k_omega": 0},
        "stepper": {"h": 1e-2, "tau_end": 0.3, "stride": 0.1},
    })
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--config", config, "--out", str(out)]) == EXIT_OK
        outs.append((out / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1]
