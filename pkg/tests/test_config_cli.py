import json
import subprocess
import sys

import numpy as np
import pytest

from kpplab.cli import default_config, main, run
from kpplab.config import ConfigError, RunConfig, build_field, normalized_mass_field, parse_profile
from kpplab.field import Bump, Grid, KinkF0, total_mass


def test_ini_round_trip():
    cfg = default_config("wave")
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert RunConfig.from_mapping(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "key,value",
    [("dt", "0.01"), ("reps", "0"), ("theta", "-1"), ("boundary", "open"), ("scheme", "rk4"),
     ("profile", "spline(3)"), ("nonsense", "1"), ("interval", "1, -1")],
)
def test_validation_names_the_key(key, value):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_mapping({key: value})
    assert exc.value.key == key


def test_profile_specs():
    g = Grid(0.1, -10, 10)
    assert parse_profile("kink") == KinkF0()
    assert parse_profile("bump(center=2, width=0.5, height=3)") == Bump(2, 0.5, 3)
    f = build_field("kink + bump(center=5)", g)
    assert f.values[0] == 1.0 and f.values[150] == pytest.approx(1.0)
    assert total_mass(normalized_mass_field("bump(mass=1)", g)) == pytest.approx(1.0, abs=1e-14)


def _cli(tmp_path, *args):
    return main([*args, "--out", str(tmp_path), "--no-figures"])


def test_simulate_zero_profile(tmp_path):
    assert _cli(tmp_path, "simulate", "--set", "profile=zero") == 0
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    assert rows[1].split(",")[1:] == ["0.0", "0.0"]
    traj = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert all(line.endswith(",0.0,-inf,inf,-inf") for line in traj[1:])


def test_exit_statuses(tmp_path, capsys):
    assert _cli(tmp_path, "simulate", "--set", "dt=1") == 2
    assert "dt" in capsys.readouterr().err
    assert _cli(tmp_path, "wave", "--set", "profile=zero", "--reps", "2") == 3


def test_config_file_and_env(tmp_path, monkeypatch):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nreps = 20\nseed = 7\n[physics]\nhorizon = 0.2\n")
    out = tmp_path / "from_env"
    monkeypatch.setenv("KPPLAB_OUTPUT_DIR", str(out))
    assert main(["extinction", "--config", str(ini), "--no-figures"]) == 0
    man = json.loads((out / "run_manifest.json").read_text())
    assert man["seed"] == 7 and len(man["streams"]) == 20
    assert man["streams"][3] == "7:3:0"
    assert RunConfig.from_ini(man["config_ini"]) == RunConfig.from_mapping(man["config"])
    assert set(man["files"]) == {"extinction.csv", "extinction_curve.csv"}
    for name in man["files"]:
        assert (out / name).exists()


def test_extinction_row_compares_with_closed_form(tmp_path):
    assert _cli(tmp_path, "extinction", "--reps", "50") == 0
    rows = (tmp_path / "extinction.csv").read_text().splitlines()
    assert rows[2].startswith("superprocess_exact,0.0422583")


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, w in ((a, "1"), (b, "3")):
        assert main(["couple", "--reps", "6", "--workers", w, "--out", str(d), "--no-figures"]) == 0
    for name in ("pairs.csv", "pair_lower.csv", "pair_upper.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize("sub", ["duality", "recurrence", "upper"])
def test_subcommands_smoke(tmp_path, sub):
    extra = {"recurrence": ["--set", "horizons=0.32, 0.64", "--set", "domain=-12, 12"],
             "upper": ["--set", "scaling_T=0.0625, 0.125"]}.get(sub, [])
    assert _cli(tmp_path, sub, "--reps", "4", *extra) == 0
    assert (tmp_path / "run_manifest.json").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "kpplab", "simulate", "--out", str(tmp_path), "--no-figures",
         "--set", "horizon=0.1"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "trajectory.csv").exists()
