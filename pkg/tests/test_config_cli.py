import csv
import json
import math

import numpy as np
import pytest

from conftest import scenario_path
from sloshdyn import checks
from sloshdyn.cli import EXIT_CHECK, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, read_matrix_blocks, trajectory_header
from sloshdyn.config import ConfigError, dumps_scenario, loads_scenario, parse_scenario

MINIMAL = {"body": {"mass": 9.0, "inertia": [[5, 0, 0], [0, 5, 0], [0, 0, 5]]}}

RIG = {
    "body": {"mass": 9.0, "inertia": [[5, 0, 0], [0, 5, 0], [0, 0, 5]], "inertia_about": "Gbar"},
    "pendulums": [{"mass": 1.0, "length": 1.0, "fulcrum": [0.0, 0.0, 0.5]}],
    "nominal": {"Fz_bar": 10.0},
    "sim": {"t0": 0.0, "tf": 1.0, "dt": 0.01},
}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_minimal_config_uses_defaults():
    cfg = loads_scenario(json.dumps(MINIMAL))
    assert cfg.pendulums == []
    assert cfg.sim.dt == 1e-3 and cfg.sim.tf == 10.0
    assert cfg.initial().n == 0


def test_unknown_field_is_named():
    data = {"body": {"masss": 9.0, "inertia": MINIMAL["body"]["inertia"]}}
    with pytest.raises(ConfigError) as info:
        loads_scenario(json.dumps(data))
    assert "body.masss: unknown field" in info.value.errors
    assert "body.mass: required field missing" in info.value.errors


def test_non_positive_length_is_reported_with_path():
    data = dict(RIG, pendulums=[{"mass": 1.0, "length": 0.0, "fulcrum": [0, 0, 0]}])
    with pytest.raises(ConfigError, match=r"pendulums\[0\]\.length > 0 \(got 0\.0\)"):
        loads_scenario(json.dumps(data))


def test_json_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError, match="line 2, column 11"):
        loads_scenario('{\n  "body": ,\n}')


@pytest.mark.parametrize(
    "inertia, match",
    [([[5, 1, 0], [0, 5, 0], [0, 0, 5]], "symmetric"), ([[1, 0, 0], [0, 1, 0], [0, 0, -1]], "positive definite")],
)
def test_bad_inertia_fails_at_parse_time(inertia, match):
    with pytest.raises(ConfigError, match=match):
        loads_scenario(json.dumps({"body": {"mass": 1.0, "inertia": inertia}}))


def test_gbar_inertia_too_small_for_body_is_rejected():
    data = dict(RIG, body=dict(RIG["body"], inertia=[[0.01, 0, 0], [0, 0.01, 0], [0, 0, 0.01]]))
    with pytest.raises(ConfigError, match="positive definite"):
        loads_scenario(json.dumps(data))


def test_damping_ratio_needs_thrust():
    data = dict(RIG, pendulums=[dict(RIG["pendulums"][0], damping_xi=0.05)], nominal=None)
    with pytest.raises(ConfigError, match=r"damping_xi requires nominal\.Fz_bar > 0"):
        loads_scenario(json.dumps(data))


def test_damping_given_twice_is_rejected():
    data = dict(RIG, pendulums=[dict(RIG["pendulums"][0], damping_xi=0.05, damping_q=0.1)])
    with pytest.raises(ConfigError, match="at most one"):
        loads_scenario(json.dumps(data))


def test_row_count_mismatch():
    data = dict(RIG, initial_state={"pendulum_angles": [[0.1, 0.0], [0.0, 0.0]]})
    with pytest.raises(ConfigError, match="needs 1 rows"):
        loads_scenario(json.dumps(data))


def test_quaternion_must_be_unit():
    data = dict(RIG, initial_state={"attitude_quat": [1.0, 0.1, 0.0, 0.0]})
    with pytest.raises(ConfigError, match="unit norm"):
        loads_scenario(json.dumps(data))


def test_round_trip_is_identity():
    cfg = parse_scenario(scenario_path("unit_rig.json"))
    again = loads_scenario(dumps_scenario(cfg))
    assert again == cfg
    assert dumps_scenario(again) == dumps_scenario(cfg)


def test_xi_is_converted_to_q():
    cfg = parse_scenario(scenario_path("unit_rig.json"))
    assert cfg.system().pendulums[0].damping == pytest.approx(0.1, rel=1e-15)


def test_simulate_free_fall(tmp_path):
    cfg = _write(tmp_path, dict(RIG, gravity=[0.0, 0.0, -9.81]))
    out = tmp_path / "traj.csv"
    assert main(["simulate", cfg, "-o", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert rows[0] == trajectory_header(1)
    assert len(rows) == 102
    final = dict(zip(rows[0], map(float, rows[-1])))
    assert final["t"] == 1.0
    assert final["rz"] == pytest.approx(-4.905, abs=1e-12)
    assert final["N_1"] == pytest.approx(0.0, abs=1e-12)


def test_simulate_at_rest_gives_constant_columns(tmp_path):
    cfg = _write(tmp_path, RIG)
    out = tmp_path / "traj.csv"
    assert main(["simulate", cfg, "-o", str(out)]) == EXIT_OK
    data = np.array(_rows(out)[1:], dtype=float)
    assert np.ptp(data[:, 1:], axis=0).max() == 0.0


def test_linearize_frames_differ_in_two_stiffness_entries(tmp_path):
    cfg = _write(tmp_path, RIG)
    a, b = tmp_path / "inertial.csv", tmp_path / "body.csv"
    assert main(["linearize", cfg, "--frame", "inertial", "-o", str(a)]) == EXIT_OK
    assert main(["linearize", cfg, "--frame", "body", "-o", str(b)]) == EXIT_OK
    ma, mb = read_matrix_blocks(a), read_matrix_blocks(b)
    assert set(ma) == {"M", "D", "K", "L_1"}
    diff = mb["K"] - ma["K"]
    assert np.count_nonzero(diff) == 2
    assert diff[0, 4] == -10.0 and diff[1, 3] == 10.0
    assert _rows(a)[0] == ["coordinates", "x", "y", "z", "theta_x", "theta_y", "theta_z", "eta_theta_1", "eta_phi_1"]


def test_linearize_physical_form_needs_single_pendulum(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["linearize", str(scenario_path("unit_rig.json")), "--form", "physical", "-o", str(out)]) == EXIT_OK
    assert read_matrix_blocks(out)["M"][2, 2] == 10.0
    four = str(scenario_path("four_pendulum_rig.json"))
    assert main(["linearize", four, "--form", "physical", "-o", str(out)]) == EXIT_USAGE


def test_bode_and_modes(tmp_path):
    cfg = _write(tmp_path, RIG)
    bode, modes = tmp_path / "bode.csv", tmp_path / "modes.csv"
    assert main(["bode", cfg, "--wmin", "0.1", "--wmax", "10", "--points", "7", "-o", str(bode)]) == EXIT_OK
    assert len(_rows(bode)) == 8
    assert main(["modes", cfg, "-o", str(modes)]) == EXIT_OK
    assert len(_rows(modes)) == 17


def test_bode_fd_source_matches_analytic(tmp_path):
    cfg = _write(tmp_path, RIG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--wmin", "0.01", "--wmax", "100", "--points", "9"]
    assert main(["bode", cfg, *args, "-o", str(a)]) == EXIT_OK
    assert main(["bode", cfg, *args, "--source", "fd", "-o", str(b)]) == EXIT_OK
    # rigid-body outputs coincide in physical and modal coordinates
    assert _rows(a)[0] == _rows(b)[0]
    ra, rb = np.array(_rows(a)[1:], dtype=float), np.array(_rows(b)[1:], dtype=float)
    live = np.isfinite(ra) & (ra > -200)
    np.testing.assert_allclose(rb[live], ra[live], rtol=0, atol=1e-4)


@pytest.mark.parametrize("points", ["0", "-3", "two"])
def test_bode_rejects_bad_points(tmp_path, points, capsys):
    cfg = _write(tmp_path, RIG)
    rc = main(["bode", cfg, "--wmin", "0.1", "--wmax", "10", "--points", points, "-o", str(tmp_path / "x.csv")])
    assert rc == EXIT_USAGE
    assert "positive integer" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["simulate", str(tmp_path / "missing.json"), "-o", "x.csv"]) == EXIT_USAGE
    assert "cannot read file" in capsys.readouterr().err
    bad = _write(tmp_path, {"body": {"mass": -1, "inertia": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}})
    assert main(["simulate", bad, "-o", "x.csv"]) == EXIT_USAGE
    assert "body.mass > 0" in capsys.readouterr().err


def test_singular_start_is_a_numerical_failure(tmp_path, capsys):
    angle = math.radians(89.9999995)
    cfg = _write(tmp_path, dict(RIG, initial_state={"pendulum_angles": [[angle, 0.0]]}))
    assert main(["simulate", cfg, "-o", str(tmp_path / "t.csv")]) == EXIT_NUMERIC
    assert "pendulum 0 singular at t = 0" in capsys.readouterr().err


def test_linearize_without_nominal_is_usage_error(tmp_path):
    cfg = _write(tmp_path, dict(RIG, nominal=None))
    assert main(["linearize", cfg, "-o", str(tmp_path / "m.csv")]) == EXIT_USAGE
    assert main(["linearize", cfg, "--fz", "10", "-o", str(tmp_path / "m.csv")]) == EXIT_OK


def _excited(tmp_path):
    data = dict(RIG, initial_state={"omega": [0.1, 0.0, 0.2], "pendulum_angles": [[0.2, -0.1]], "pendulum_rates": [[0.5, 0.0]]})
    return _write(tmp_path, data)


def test_check_passes_and_is_deterministic(tmp_path, capsys):
    cfg = _excited(tmp_path)
    assert main(["check", cfg, "--residual-states", "20"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["check", cfg, "--residual-states", "20"]) == EXIT_OK
    assert capsys.readouterr().out == first
    lines = first.strip().splitlines()
    assert lines[0] == "check,status,value,tolerance"
    names = [line.split(",")[0] for line in lines[1:]]
    assert names[:3] == ["energy", "momentum", "angular_momentum"]
    assert "congruence,pass" in first and "fd_K,pass" in first


def test_check_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(checks.TOL, "energy", 0.0)
    assert main(["check", _excited(tmp_path), "--residual-states", "5"]) == EXIT_CHECK
    assert "FAILED: energy" in capsys.readouterr().err


def test_minimal_config_with_pendulum_and_gravity():
    data = dict(MINIMAL, pendulums=[{"mass": 1.0, "length": 1.0, "fulcrum": [0, 0, 0.5]}], gravity=[0, 0, -9.81])
    cfg = loads_scenario(json.dumps(data))
    p = cfg.system().pendulums[0]
    assert p.damping == 0.0
    np.testing.assert_array_equal(p.fulcrum_dcm, np.eye(3))
    np.testing.assert_array_equal(cfg.initial().rates, [[0.0, 0.0]])


def test_outputs_are_byte_identical_across_runs(tmp_path):
    cfg = _excited(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        assert main(["simulate", cfg, "-o", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_unit_rig_modal_stiffness_prints_unit_diagonal(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["linearize", str(scenario_path("unit_rig.json")), "--form", "modal", "-o", str(out)]) == EXIT_OK
    K = read_matrix_blocks(out)["K"]
    assert K[6, 6] == 1.0 and K[7, 7] == 1.0
