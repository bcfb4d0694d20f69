"""Scenario loading, the four CLI commands and their on-disk artefacts."""

import csv
import json
from importlib import resources

import numpy as np
import pytest
import yaml

from catp.channel import RadioMap, RadioMapChannel
from catp.cli import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_SCHEMA,
    MemoryBudgetError,
    channel_map,
    cmd_channel_map,
    cmd_optimize,
    cmd_simulate,
    cmd_validate,
    main,
)
from catp.scenario import ScenarioError, load_scenario, parse_scenario

SCENARIOS = resources.files("catp") / "scenarios"


def bundled(name):
    return str(SCENARIOS / f"{name}.yaml")


def minimal_dict():
    return yaml.safe_load((SCENARIOS / "minimal.yaml").read_text())


def write_variant(tmp_path, data, name="variant.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    rows = list(csv.reader(lines[1:]))
    return rows[0], np.array([[float(v) if v else np.nan for v in r] for r in rows[1:]])


# --- loading ------------------------------------------------------------

@pytest.mark.parametrize("name", ["minimal", "point_to_point_bits", "infeasible", "ddr_desk_benchmark"])
def test_bundled_scenarios_load(name):
    loaded = load_scenario(bundled(name))
    assert loaded.spec.name == name
    assert len(loaded.hash) == 64


def test_misspelled_key_is_named(tmp_path):
    data = minimal_dict()
    data["problem"]["horizon"] = data["problem"].pop("horizon_s")
    with pytest.raises(ScenarioError) as err:
        load_scenario(write_variant(tmp_path, data))
    msg = str(err.value)
    assert "horizon" in msg
    assert "unknown key" in msg
    assert "missing required key" in msg


def test_negative_wheel_radius_cites_parameter_class(tmp_path):
    data = minimal_dict()
    data["robot"] = {"model": "ddr_kinematic", "wheel_radius_m": -0.05, "half_axle_m": 0.15,
                     "initial_state": [0.0, 0.0, 0.0]}
    with pytest.raises(ScenarioError, match="DdrParams"):
        load_scenario(write_variant(tmp_path, data))


def test_unknown_model_rejected(tmp_path):
    data = minimal_dict()
    data["robot"]["model"] = "hovercraft"
    with pytest.raises(ScenarioError, match="model"):
        load_scenario(write_variant(tmp_path, data))


def test_missing_model_parameter_named():
    data = minimal_dict()
    data["robot"] = {"model": "tomr_kinematic", "wheel_radius_m": 0.05, "initial_state": [0.0, 0.0, 0.0]}
    with pytest.raises(ScenarioError, match="center_distance_m"):
        parse_scenario(yaml.safe_dump(data))


def test_missing_file_and_non_mapping(tmp_path):
    with pytest.raises(ScenarioError, match="file not found"):
        load_scenario(tmp_path / "nope.yaml")
    with pytest.raises(ScenarioError, match="mapping"):
        parse_scenario("- just\n- a list\n")


def test_schema_error_exit_code(tmp_path, capsys):
    data = minimal_dict()
    data["robot"]["modle"] = "x"
    path = write_variant(tmp_path, data)
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SCHEMA
    assert "modle" in capsys.readouterr().err


def test_seed_override():
    loaded = load_scenario(bundled("minimal"))
    assert loaded.with_seed(None).spec.seed == loaded.spec.seed
    assert loaded.with_seed(99).spec.seed == 99


# --- simulate -----------------------------------------------------------

def test_zero_control_simulation_is_stationary(tmp_path):
    res = cmd_simulate(load_scenario(bundled("minimal")), tmp_path)
    header, table = read_csv(res["csv"])
    assert header[:3] == ["t", "x", "y"]
    assert header[-7:] == ["gain_db", "snr_db", "tx_power_w", "rate_bps", "outage", "cum_E_motion_J", "cum_E_comm_J"]
    assert table.shape[0] == 11
    col = {name: table[:, i] for i, name in enumerate(header)}
    np.testing.assert_allclose(col["t"], np.linspace(0, 10, 11))
    np.testing.assert_array_equal(col["x"], 0.0)
    np.testing.assert_array_equal(col["y"], 0.0)
    np.testing.assert_array_equal(col["cum_E_motion_J"], 0.0)
    # constant 0.1 W for 10 s
    assert col["cum_E_comm_J"][-1] == pytest.approx(1.0, rel=1e-12)
    # free-space gain at 10 m with alpha 2 is -20 dB
    np.testing.assert_allclose(col["gain_db"], -20.0, atol=1e-9)
    report = json.loads(res["report"].read_text())
    assert report["command"] == "simulate"
    assert (tmp_path / "timing.json").is_file()


def test_simulate_is_byte_identical(tmp_path):
    loaded = load_scenario(bundled("point_to_point_bits"))
    a = cmd_simulate(loaded, tmp_path / "a")
    b = cmd_simulate(loaded, tmp_path / "b")
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    assert a["report"].read_bytes() == b["report"].read_bytes()
    assert a["report_hash"] == b["report_hash"]


def test_constant_profile_moves_robot(tmp_path):
    res = cmd_simulate(load_scenario(bundled("point_to_point_bits")), tmp_path)
    header, table = read_csv(res["csv"])
    col = {name: table[:, i] for i, name in enumerate(header)}
    # unit velocity along x for 10 s
    assert col["x"][-1] == pytest.approx(10.0, abs=1e-9)
    assert col["cum_E_motion_J"][-1] == pytest.approx(10.0, rel=1e-9)


# --- optimize -----------------------------------------------------------

def _small_optimize(tmp_path):
    data = yaml.safe_load((SCENARIOS / "point_to_point_bits.yaml").read_text())
    data["problem"]["intervals"] = 6
    data["problem"]["mc_samples"] = 32
    data["problem"]["solver"] = {"population": 24, "iterations": 8}
    return load_scenario(write_variant(tmp_path, data, "small.yaml"))


def test_optimize_rerun_reproduces_report_hash(tmp_path):
    loaded = _small_optimize(tmp_path)
    a = cmd_optimize(loaded, tmp_path / "a", history=True)
    b = cmd_optimize(loaded, tmp_path / "b", history=True)
    assert a["report_hash"] == b["report_hash"]
    assert a["report"].read_bytes() == b["report"].read_bytes()
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    assert a["history"].read_bytes() == b["history"].read_bytes()
    report = json.loads(a["report"].read_text())
    assert report["command"] == "optimize"
    assert {row["name"] for row in report["feasibility"]} == {"bits", "terminal"}
    c = cmd_optimize(loaded, tmp_path / "c", seed=5)
    assert c["report_hash"] != a["report_hash"]


def test_infeasible_scenario_exit_code(tmp_path):
    out = tmp_path / "o"
    code = main(["optimize", "--scenario", bundled("infeasible"), "--out", str(out), "--quiet"])
    assert code == EXIT_INFEASIBLE
    report = json.loads((out / "report.json").read_text())
    assert report["feasible"] is False
    bits = next(row for row in report["feasibility"] if row["name"] == "bits")
    assert not bits["satisfied"]
    assert bits["residual"] > 0


def test_main_simulate_ok(tmp_path, capsys):
    assert main(["simulate", "--scenario", bundled("minimal"), "--out", str(tmp_path)]) == EXIT_OK
    assert "wrote" in capsys.readouterr().out


# --- channel-map --------------------------------------------------------

def test_deterministic_map_layers_agree(tmp_path):
    res = cmd_channel_map(load_scenario(bundled("minimal")), tmp_path)
    rmap = res["map"]
    assert rmap.grid.shape == (21, 21)
    np.testing.assert_array_equal(rmap.layers["mean_gain_db"], rmap.layers["realization_db"])
    back = RadioMap.read(res["radio_map"])
    for name in rmap.layers:
        np.testing.assert_array_equal(back.layers[name], rmap.layers[name])


def _shadowed(tmp_path, sigma=4.0):
    data = minimal_dict()
    data["channel"]["shadowing"] = {"sigma_db": sigma, "beta_m": 3.0,
                                    "grid": {"origin_m": [-6.0, -6.0], "spacing_m": 0.5, "shape": [25, 25]}}
    data["channel"]["near_field"] = "clamp"
    return load_scenario(write_variant(tmp_path, data, "shadowed.yaml"))


def test_shadowing_map_varies_by_seed_and_averages_to_mean(tmp_path):
    loaded = _shadowed(tmp_path)
    first = channel_map(loaded, seed=1)
    second = channel_map(loaded, seed=2)
    assert not np.allclose(first.layers["realization_db"], second.layers["realization_db"])
    np.testing.assert_array_equal(first.layers["mean_gain_db"], second.layers["mean_gain_db"])
    n = 60
    avg = np.mean([channel_map(loaded, seed=s).layers["realization_db"] for s in range(n)], axis=0)
    # each cell averages n independent N(0, 4^2) draws
    assert np.max(np.abs(avg - first.layers["mean_gain_db"])) < 5 * 4.0 / np.sqrt(n)


def test_radio_map_round_trip_as_channel(tmp_path):
    loaded = _shadowed(tmp_path)
    res = cmd_channel_map(loaded, tmp_path / "map")
    ch = RadioMapChannel(RadioMap.read(res["radio_map"]), "realization_db")
    grid = res["map"].grid
    xs, ys = grid.coordinates()
    pts = np.stack([xs, ys], axis=-1)
    got = ch.realization_db(pts, np.array([10.0, 0.0]))
    np.testing.assert_allclose(got, res["map"].layers["realization_db"], atol=1e-9)


def test_channel_map_memory_budget(tmp_path):
    data = minimal_dict()
    data["channel_map"]["spacing_m"] = 0.001
    path = write_variant(tmp_path, data)
    with pytest.raises(MemoryBudgetError, match="max_cells"):
        channel_map(load_scenario(path))
    assert main(["channel-map", "--scenario", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_RUNTIME


def test_channel_map_needs_block(tmp_path):
    data = minimal_dict()
    del data["channel_map"]
    path = write_variant(tmp_path, data)
    assert main(["channel-map", "--scenario", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SCHEMA


# --- validate -----------------------------------------------------------

def _validate_variant(tmp_path, **fields):
    data = minimal_dict()
    data["validate"] = {"shadowing_size": 128, "fading_samples": 4000, "mc_samples": 20000,
                        "rician_k": [5.0], **fields}
    return load_scenario(write_variant(tmp_path, data, "validate.yaml"))


def test_validate_default_passes(tmp_path):
    res = cmd_validate(load_scenario(bundled("minimal")), tmp_path)
    statuses = {r.name: r.status for r in res["checks"]}
    assert set(statuses.values()) == {"pass"}, statuses
    report = json.loads(res["report"].read_text())
    assert report["summary"] == {"pass": len(statuses), "fail": 0, "skipped": 0}


def test_validate_zero_sigma_skips(tmp_path):
    res = cmd_validate(_validate_variant(tmp_path, shadowing_sigma_db=0.0), tmp_path / "o")
    shadow = [r for r in res["checks"] if r.name.startswith("shadowing")]
    assert shadow and all(r.status == "skipped" for r in shadow)


def test_validate_wrong_wavelength_fails(tmp_path):
    res = cmd_validate(_validate_variant(tmp_path, check_wavelength_m=0.5), tmp_path / "o")
    status = {r.name: r.status for r in res["checks"]}
    assert status["jakes_correlation[lambda/2]"] == "fail"
