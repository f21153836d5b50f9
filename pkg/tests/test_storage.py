from __future__ import annotations

import numpy as np
import pytest

from sdflow.grid import Field, build_grid
from sdflow.storage import OutputDir, OutputError, RunManifest, canonical_json, config_hash, read_field_csv


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert canonical_json({"x": np.float64(1.5), "y": float("inf")}) == '{"x":1.5,"y":"inf"}'


def test_field_roundtrip_is_exact(tmp_path):
    g = build_grid("truncated", 3.0, 32)
    f = Field(g, np.sin(g.x) / 3, 0.125, "v")
    out = OutputDir(tmp_path)
    out.write_field("f.csv", f)
    back = read_field_csv(tmp_path / "f.csv")
    assert back.grid == g and back.time == 0.125 and np.array_equal(back.values, f.values)


def test_overwrite_and_escape_guards(tmp_path):
    out = OutputDir(tmp_path)
    out.write_json("a.json", {"k": 1})
    out.write_json("a.json", {"k": 2})  # same session may rewrite its own file
    with pytest.raises(OutputError):
        OutputDir(tmp_path).write_json("a.json", {})
    OutputDir(tmp_path, overwrite=True).write_json("a.json", {})
    with pytest.raises(OutputError):
        out.write_json("../escape.json", {})


def test_manifest_separates_wall_clock():
    d = RunManifest({"a": 1}).to_dict()
    assert set(d["wall_clock"]) >= {"started", "finished"}
    assert "started" not in d
