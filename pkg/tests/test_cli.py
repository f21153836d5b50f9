from __future__ import annotations

import csv
import json

import pytest

from sdflow import cli


def _rows(path):
    with open(path) as fh:
        return [r for r in csv.reader(l for l in fh if not l.startswith("#"))]


def test_kernel_table_shape_and_rerun_identical(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["kernel", "--range", "12", "--step", "0.01", "--out", str(out)]) == 0
    (csv_path,) = out.glob("kernel_*.csv")
    rows = _rows(csv_path)
    assert rows[0] == ["y", "bbar", "dbbar"] and len(rows) == 1202
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert cli.main(["kernel", "--range", "12", "--step", "0.01", "--out", str(out)]) == cli.EXIT_IO
    assert cli.main(["kernel", "--range", "12", "--step", "0.01", "--out", str(out), "--overwrite"]) == 0
    for name, data in first.items():
        if not name.startswith("manifest"):
            assert (out / name).read_bytes() == data


def test_config_roundtrip():
    cfg = cli.resolve_config({"subcommand": "simulate", "params": {"grid": {"N": 128}}})
    again = cli.load_config_text(cli.dump_config(cfg))
    assert again == cfg
    assert cli.dump_config(again) == cli.dump_config(cfg)


@pytest.mark.parametrize("raw,msg", [
    ({"subcommand": "kernel", "params": {"rnge": 1}}, "unknown key"),
    ({"subcommand": "nope"}, "subcommand"),
    ({"subcommand": "kernel", "extra": 1}, "unknown top-level"),
    ({"subcommand": "kernel", "params": {"step": "a"}}, "number"),
    ({"subcommand": "simulate", "params": {"model": "cubic"}}, "model"),
])
def test_config_errors(raw, msg):
    with pytest.raises(cli.ConfigError, match=msg):
        cli.resolve_config(raw)


def test_malformed_json_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "subcommand": "kernel",\n  "params": {"range": 3,}\n}')
    assert cli.main(["run", str(p)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 3" in err and "column" in err


def test_run_config_and_env_output(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"subcommand": "kernel", "params": {"range": 2, "step": 0.5, "bound_orders": [0]}}))
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(p)]) == 0
    assert list((tmp_path / "env").glob("kernel_*.csv"))
    man = json.loads(next((tmp_path / "env").glob("manifest_*.json")).read_text())
    assert man["status"] == "ok" and "wall_clock" in man


def test_simulate_writes_snapshots_and_blowup_exit(tmp_path):
    out = tmp_path / "s"
    args = ["simulate", "--L", "8", "--N", "64", "--t-end", "0.1", "--initial", "sine", "0.02", "--out", str(out)]
    assert cli.main(args) == 0
    traj = json.loads(next(out.glob("trajectory_*.json")).read_text())
    assert traj["blow_up"] is None and len(traj["snapshots"]) == len(traj["times"])
    bad = ["simulate", "--L", "8", "--N", "128", "--t-end", "1", "--initial", "gaussian-slope", "3",
           "--set", "initial.width=0.1", "--out", str(tmp_path / "b")]
    assert cli.main(bad) == cli.EXIT_BLOWUP
    assert list((tmp_path / "b" / "snapshots").glob("blowup_*.csv"))


def test_simulate_ramp_writes_u(tmp_path):
    out = tmp_path / "r"
    args = ["simulate", "--grid", "truncated", "--L", "16", "--N", "128", "--t-end", "0.5",
            "--initial", "smoothed-ramp", "0.1", "-0.1", "1", "--out", str(out)]
    assert cli.main(args) == 0
    assert list((out / "snapshots").glob("u_*.csv"))


def test_validate_passes(tmp_path):
    assert cli.main(["validate", "--out", str(tmp_path)]) == 0
    rep = json.loads(next(tmp_path.glob("validate_*.json")).read_text())
    assert rep["passed"] and len(rep["checks"]) >= 10


def test_rescale_small(tmp_path):
    args = ["rescale", "--out", str(tmp_path), "--set", "grid.N=512", "--set", "grid.L=32", "--set", "sigmas=[1,2]"]
    assert cli.main(args) == 0
    rows = _rows(next(tmp_path.glob("rescaled_sigma2_*.csv")))
    assert rows[0] == ["t", "x", "u_sigma"] and len(rows) == 1 + 3 * 81


def test_bad_flag_is_config_error():
    assert cli.main(["kernel", "--bogus"]) == cli.EXIT_CONFIG
