"""Deterministic CSV/JSON writers, config hashing and the run manifest."""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Field, GridSpec

__version__ = "0.1.0"


class OutputError(OSError):
    """An output path is unusable (exists without overwrite, or escapes the output root)."""


def _clean(obj):
    # numpy scalars/arrays -> plain Python so json output is stable
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict, length: int = 10) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:length]


def fmt(x: float) -> str:
    return "%.17g" % float(x)


class OutputDir:
    """All writes of one experiment go through here and stay under ``root``."""

    def __init__(self, root: str | os.PathLike, overwrite: bool = False):
        self.root = Path(root).resolve()
        self.overwrite = overwrite
        self.written: list[str] = []
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create output directory {self.root}: {exc}") from exc

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents and p != self.root:
            raise OutputError(f"{name!r} escapes the output directory")
        if p.exists() and not self.overwrite and name not in self.written:
            raise OutputError(f"{p} exists; pass --overwrite to replace it")
        return p

    def _write(self, name: str, text: str) -> Path:
        p = self.path(name)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            with open(p, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputError(f"cannot write {p}: {exc}") from exc
        if name not in self.written:
            self.written.append(name)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self._write(name, json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[float]],
                  meta: dict | None = None) -> Path:
        lines = [f"# {k}={v}" for k, v in (meta or {}).items()]
        lines.append(",".join(header))
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        return self._write(name, "\n".join(lines) + "\n")

    def write_field(self, name: str, field_: Field, meta: dict | None = None) -> Path:
        head = {"t": fmt(field_.time), "label": field_.label,
                "grid": canonical_json(field_.grid.to_dict())}
        head.update(meta or {})
        lines = [f"# {k}={v}" for k, v in head.items()]
        lines.append("x,value")
        lines.extend(f"{fmt(x)},{fmt(v)}" for x, v in zip(field_.grid.x, field_.values))
        return self._write(name, "\n".join(lines) + "\n")


def read_field_csv(path: str | os.PathLike) -> Field:
    """Inverse of :meth:`OutputDir.write_field`."""
    meta: dict[str, str] = {}
    xs, vals = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif line == "x,value" or not line:
                continue
            else:
                a, b = line.split(",")
                xs.append(float(a))
                vals.append(float(b))
    g = json.loads(meta["grid"])
    grid = GridSpec(g["kind"], g["half_length"], g["n"])
    return Field(grid, np.array(vals), float(meta["t"]), meta.get("label", "u"))


@dataclass
class RunManifest:
    config: dict
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    started: float = field(default_factory=time.time)
    finished: float | None = None
    status: str = "running"

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_hash": config_hash(self.config),
            "version": self.version,
            "outputs": list(self.outputs),
            "status": self.status,
            # wall-clock metadata: the only non-reproducible fields
            "wall_clock": {
                "started": self.started,
                "finished": self.finished,
                "host": platform.node(),
                "python": platform.python_version(),
            },
        }
