import subprocess
import sys

import numpy as np
import pytest

from epadm.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_RUNTIME, build_scenario, main
from epadm.config import ConfigError, load_config, parse_value
from epadm.diagnostics import read_diagnostics
from epadm.runner import integrate, output_times
from epadm.scenarios import make_scenario
from epadm.snapshot import read_snapshot


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("0.5") == 0.5
    assert parse_value("(0.3, 0)") == (0.3, 0)
    assert parse_value("yes") is True and parse_value("off") is False
    assert parse_value("none") is None
    assert parse_value("minkowski") == "minkowski"


def test_load_config_and_overrides(tmp_path):
    p = write(tmp_path, "[scenario]\nname = vortex_2d  # inline comment\n[grid]\npoints = 32\n[loop.a]\ncenter = (0.5, 0.5)\nradius = 0.1\n")
    cfg = load_config(p, ["grid.points=16", "numerics.safety=0.3"])
    assert cfg.get("scenario", "name") == "vortex_2d"
    assert cfg.get("grid", "points") == 16 and cfg.get("numerics", "safety") == 0.3
    assert cfg.loops() == {"a": {"center": (0.5, 0.5), "radius": 0.1}}


@pytest.mark.parametrize("text,match", [
    ("[scenario]\nname = rest_state\n\nspeed_of_light = 2\n", "line 4: unknown key 'speed_of_light'"),
    ("[scenery]\nname = x\n", "unknown section"),
    ("[output]\nfields = ('J0', 'p')\n", "unknown output fields"),
    ("[loop.a]\ncentre = (0, 0)\n", "unknown key"),
    ("[scenario\nname = x\n", None),
])
def test_malformed_configs(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path, text))


def test_bad_overrides():
    with pytest.raises(ConfigError):
        load_config(None, ["grid.points"])
    with pytest.raises(ConfigError):
        load_config(None, ["points=3"])
    with pytest.raises(ConfigError):
        load_config(None, ["grid.colour=red"])


def test_build_scenario_maps_sections():
    cfg = load_config(None, ["scenario.name=uniform_advection", "grid.points=8", "eos.kind=dust",
                             "frame.kind=translation", "frame.velocity=(0.3, 0)", "output.cadence=0.25",
                             "loop.z.center=(0.5, 0.5)", "loop.z.radius=0.2", "loop.z.markers=32"])
    sc = build_scenario(cfg)
    assert sc.grid.points == (8, 8) and sc.eos.kind == "dust"
    assert np.allclose(sc.frame.map.c, [0.3, 0.0]) and sc.output_every == 0.25
    assert [lp.name for lp in sc.loops] == ["z"] and sc.loops[0].n == 32
    with pytest.raises(ConfigError):
        build_scenario(load_config(None, ["grid.points=8"]))
    with pytest.raises(ConfigError):
        build_scenario(load_config(None, ["scenario.name=rest_state", "eos.kind=plasma"]))


def test_output_times():
    assert output_times(1.0, 0.25) == [0.25, 0.5, 0.75, 1.0]
    assert output_times(1.0, 0.3)[-1] == 1.0 and len(output_times(1.0, 0.3)) == 4
    assert output_times(1.0, None) == [1.0]


def test_integrate_lands_on_output_times():
    sc = make_scenario("acoustic_1d", points=32)
    model = sc.build_model()
    res = integrate(model, sc.initial_state(model), 0.3, safety=0.4, every=0.1, keep_outputs=True)
    assert [r["t"] for r in res.records] == [0.0, 0.1, 0.2, 0.3]
    assert [o[0] for o in res.outputs] == [0.0, 0.1, 0.2, 0.3]


def test_run_rest_state(tmp_path):
    cfg = write(tmp_path, "[scenario]\nname = rest_state\nt_end = 0.1\n[grid]\npoints = 8\n"
                          "[output]\ncadence = 0.05\n[loop.a]\ncenter = (0.5, 0.5)\nradius = 0.2\nmarkers = 32\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    d = read_diagnostics(out / "diagnostics.csv")
    assert np.all(d["mass"] == d["mass"][0]) and np.all(d["circ_a"] == 0.0)
    assert list(d["t"]) == [0.0, 0.05, 0.1]
    grid, J, name = read_snapshot(out / "J0_0002.epadm")
    assert grid.points == (8, 8) and np.all(J == 1.0) and name.startswith("J0@")
    assert "mass drift" in (out / "summary.txt").read_text()


def test_run_is_bit_reproducible(tmp_path):
    args = ["run", "--override", "scenario.name=vortex_2d", "--override", "grid.points=16",
            "--override", "scenario.t_end=0.05", "--quiet"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()
    assert (tmp_path / "a" / "u_0001.epadm").read_bytes() == (tmp_path / "b" / "u_0001.epadm").read_bytes()


def test_run_twin_report(tmp_path):
    out = tmp_path / "twin"
    code = main(["run", "--override", "scenario.name=moving_frame_twin", "--override", "grid.points=64",
                 "--override", "scenario.t_end=0.5", "--override", "output.cadence=0.25",
                 "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    rows = (out / "twin_report.csv").read_text().splitlines()
    assert rows[0] == "t,max_err_u,max_err_J0" and len(rows) == 4
    assert max(float(v) for r in rows[1:] for v in r.split(",")[1:]) < 1e-6
    assert (out / "inertial" / "diagnostics.csv").exists() and (out / "moving" / "diagnostics.csv").exists()
    assert "frame equivalence max discrepancy" in (out / "summary.txt").read_text()


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, "[scenario]\nname = rest_state\nbogus = 1\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert main(["verify", "nonsense"]) == EXIT_CONFIG
    assert main(["fly"]) == EXIT_CONFIG
    # a time step far beyond stability ends in a rejected step
    code = main(["run", "--override", "scenario.name=acoustic_1d", "--override", "scenario.amplitude=0.5",
                 "--override", "grid.points=128", "--override", "numerics.dt=0.09",
                 "--override", "scenario.t_end=5.0", "--out", str(tmp_path / "y"), "--quiet"])
    assert code == EXIT_RUNTIME


def test_thread_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("EPADM_THREADS", "zero")
    assert main(["verify", "eos", "--quiet"]) == EXIT_CONFIG
    monkeypatch.setenv("EPADM_THREADS", "1")
    assert main(["verify", "eos", "--quiet"]) == EXIT_OK


def test_verify_eos_and_pullback(capsys):
    assert main(["verify", "eos"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "p = n rho' - rho" in out and "checks passed" in out
    assert main(["verify", "pullback", "--quiet"]) == EXIT_OK


def test_verify_failure_exit_code(monkeypatch):
    from epadm import cli
    from epadm.oracles import Check
    monkeypatch.setattr(cli, "run_suite", lambda name, seed=0: [Check("forced", 1.0, 0.1)])
    assert cli.main(["verify", "eos", "--quiet"]) == EXIT_FAIL


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "epadm.cli", "verify", "eos", "--quiet"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "26/26" in res.stdout
