import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from omegaturn import config as C
from omegaturn.cli import EXIT_CONFIG, EXIT_OK, EXIT_SIMULATION, main


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_defaults_validate_and_round_trip():
    cfg = C.validate({})
    again = C.validate(json.loads(C.dumps(cfg)))
    assert again == cfg
    assert C.config_hash(again) == C.config_hash(cfg)


@given(st.floats(0.0, 1.5), st.integers(0, 10_000), st.sampled_from(["fixed", "frozen", "optimize"]))
def test_round_trip_property(k_o, seed, designs):
    cfg = C.validate({"seed": seed, "design": {"k_o": k_o}, "sweep": {"designs": designs}})
    assert C.validate(json.loads(C.dumps(cfg))) == cfg


def test_every_shipped_config_validates():
    names = C.shipped_configs()
    assert "fig4" in names
    for name in names:
        C.load_config(name)


def test_overrides_parse_json_values():
    cfg = C.load_config(None, ["design.k_o=0.75", "sweep.values=[1, 2]", "height.space=forward"])
    assert cfg["design"]["k_o"] == 0.75 and cfg["sweep"]["values"] == [1, 2]
    assert cfg["height"]["space"] == "forward"


@pytest.mark.parametrize("bad", [
    {"nonsense": 1},
    {"design": {"k_o": "one"}},
    {"design": {"a_f": -3.0}},
    {"schema_version": 2},
    {"sweep": {"parameter": "mu"}},
    {"simulation": {"cycles": 0}},
    {"compliance": {"M": [1.0]}},
])
def test_invalid_configs_raise(bad):
    with pytest.raises(C.ConfigError):
        C.validate(bad)


def test_hash_ignores_output_dir_only():
    a = C.validate({"output_dir": "x"})
    assert C.config_hash(a) == C.config_hash(C.validate({"output_dir": "y"}))
    assert C.config_hash(a) != C.config_hash(C.validate({"seed": 1}))


def test_unknown_key_exits_with_config_code(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--set", "design.bogus=1") == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["exit_code"] == EXIT_CONFIG


def test_bad_subcommand_is_config_error(tmp_path):
    assert run(tmp_path, "dance") == EXIT_CONFIG


def test_simulation_failure_writes_error_json(tmp_path):
    # a joint limit far below the design amplitudes leaves the optimizer no feasible start
    code = run(tmp_path, "optimize", "--set", "design.theta_max=5", "--set", "optimizer.grid_values=3")
    assert code == EXIT_SIMULATION
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["error"] == "SimulationError"


def test_shipped_ko_sweep_peaks_at_one(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--config", "fig4", "--set", "simulation.cycles=1") == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["argmax"] == 1.0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("config_hash,k_o,angular_displacement")
    assert all(line.startswith(summary["config_hash"]) for line in lines[1:])
    assert len(lines) == 8
    assert summary["config_hash"] in (tmp_path / "sweep.svg").read_text()


def test_zero_design_does_not_move(tmp_path):
    zero = ["--set", "design.a_f=0", "--set", "design.a_o=0", "--set", "simulation.cycles=1"]
    assert run(tmp_path, "simulate", *zero) == EXIT_OK
    m = json.loads((tmp_path / "metrics.json").read_text())["metrics"]
    assert abs(m["angular_displacement"]) < 1e-9 and m["translation_drift"] < 1e-9


def test_rerun_is_byte_identical(tmp_path):
    args = ["sweep", "--set", "sweep.values=[0.0, 1.0]", "--set", "sweep.designs=\"frozen\"",
            "--set", "simulation.cycles=1"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    names = sorted(p.name for p in a.iterdir() if p.name != "config.json")
    assert names == sorted(p.name for p in b.iterdir() if p.name != "config.json")
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_height_and_report(tmp_path):
    assert run(tmp_path, "height", "--set", "height.tau_cells=16", "--set", "height.amp_cells=9") == EXIT_OK
    h = json.loads((tmp_path / "height.json").read_text())
    assert h["shape"] == [16, 9] and 0 < h["feasible_fraction"] <= 1
    assert run(tmp_path / "sweep", "sweep", "--set", "sweep.values=[1.0]", "--set", "simulation.cycles=1") == EXIT_OK
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["tables"] == ["sweep/sweep.csv"] and rep["entries"] > 0


def test_multileg_command(tmp_path):
    assert run(tmp_path, "multileg", "--set", "multileg.A3_values=[0, 10]", "--set", "multileg.phi_cells=16",
               "--set", "multileg.w3_cells=9", "--set", "multileg.steps_per_cycle=100") == EXIT_OK
    rows = json.loads((tmp_path / "multileg.json").read_text())["rows"]
    assert [r["A3_deg"] for r in rows] == [0, 10]
    assert np.allclose([r["angular_displacement"] for r in rows], 0.0, atol=1e-6)
