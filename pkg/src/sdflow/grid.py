"""Grids, sampled fields, trajectories and discrete calculus.

The real line is modelled either as a periodic box ``[-L, L)`` (spectral
accuracy, data with compactly supported slope) or as a truncated interval
with one-sided finite-difference closures (ramp data). Nodes always follow
``x_j = -L + j * dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class GridError(ValueError):
    """Invalid grid parameters or a field/grid mismatch."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or infinite values."""


class WindowError(ValueError):
    """A requested time window holds too few snapshots."""


class GridKind(str, Enum):
    PERIODIC = "periodic"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class GridSpec:
    kind: GridKind
    half_length: float
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GridKind(self.kind))
        if not self.half_length > 0 or not math.isfinite(self.half_length):
            raise GridError(f"half_length must be positive, got {self.half_length}")
        if int(self.n) != self.n or self.n < 8:
            raise GridError(f"need at least 8 points, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def periodic(self) -> bool:
        return self.kind is GridKind.PERIODIC

    @property
    def ghost_cells(self) -> int:
        # fourth-order stencils reach two nodes past a truncated boundary
        return 0 if self.periodic else 2

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "half_length": self.half_length, "n": self.n}


def build_grid(kind: str | GridKind, half_length: float, n: int) -> GridSpec:
    return GridSpec(GridKind(kind), float(half_length), n)


@dataclass(frozen=True)
class Field:
    """A function sampled on a grid at one instant. Values are read-only."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    label: str = "u"

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteFieldError(f"field {self.label!r} at t={self.time} is not finite")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_function(cls, grid: GridSpec, fn, time: float = 0.0, label: str = "u") -> "Field":
        return cls(grid, fn(grid.x), time, label)

    def replace(self, values=None, time=None, label=None) -> "Field":
        return Field(
            self.grid,
            self.values if values is None else values,
            self.time if time is None else time,
            self.label if label is None else label,
        )

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))


def check_same_grid(*fields: Field) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError("fields live on different grids")
    return grid


# -- discrete calculus -------------------------------------------------------


def fornberg_weights(x0: float, nodes: Sequence[float], order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _stencil_width(order: int) -> int:
    return 5 if order <= 2 else 7


def spectral_derivative(values: np.ndarray, grid: GridSpec, order: int) -> np.ndarray:
    k = grid.wavenumbers
    mult = (1j * k) ** order
    if grid.n % 2 == 0 and order % 2 == 1:
        mult[grid.n // 2] = 0.0
    return np.real(np.fft.ifft(mult * np.fft.fft(values)))


def central_derivative(values: np.ndarray, grid: GridSpec, order: int) -> np.ndarray:
    width = _stencil_width(order)
    half = width // 2
    offsets = np.arange(-half, half + 1)
    w = fornberg_weights(0.0, offsets, order) / grid.dx**order
    if grid.periodic:
        out = np.zeros_like(values, dtype=float)
        for off, wk in zip(offsets, w):
            out += wk * np.roll(values, -off)
        return out
    n = grid.n
    out = np.empty(n)
    out[half : n - half] = sum(
        wk * values[half + off : n - half + off] for off, wk in zip(offsets, w)
    )
    # one-sided closures: shift the stencil inward and add one point
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - width - 1)
        idx = np.arange(start, start + width + 1)
        wi = fornberg_weights(float(i), idx.astype(float), order) / grid.dx**order
        out[i] = wi @ values[idx]
    return out


def derivative_values(values: np.ndarray, grid: GridSpec, order: int, scheme: str = "auto") -> np.ndarray:
    if order == 0:
        return np.array(values, dtype=float)
    if not 1 <= order <= 4:
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    if scheme == "auto":
        scheme = "spectral" if grid.periodic else "central"
    if scheme == "spectral":
        if not grid.periodic:
            raise GridError("spectral differentiation needs a periodic grid")
        return spectral_derivative(values, grid, order)
    if scheme == "central":
        return central_derivative(values, grid, order)
    raise ValueError(f"unknown scheme {scheme!r}")


def differentiate(field: Field, order: int, scheme: str = "auto") -> Field:
    vals = derivative_values(field.values, field.grid, order, scheme)
    return field.replace(values=vals, label=f"d{order}({field.label})")


def interpolate(field: Field, xs: np.ndarray) -> np.ndarray:
    """Evaluate a field off-grid: trigonometric on periodic grids, cubic spline otherwise."""
    xs = np.asarray(xs, dtype=float)
    grid = field.grid
    if grid.periodic:
        coeffs = np.fft.fft(field.values) / grid.n
        k = grid.wavenumbers.copy()
        if grid.n % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real
            nyq = grid.n // 2
            k = np.append(k, -k[nyq])
            coeffs = np.append(coeffs, coeffs[nyq] / 2)
            coeffs[nyq] /= 2
        phase = np.exp(1j * np.outer(xs + grid.half_length, k))
        return np.real(phase @ coeffs)
    from scipy.interpolate import CubicSpline

    lo, hi = grid.x[0], grid.x[-1]
    if np.any(xs < lo - 1e-12) or np.any(xs > hi + 1e-12):
        raise GridError("interpolation point outside truncated grid")
    return CubicSpline(grid.x, field.values)(xs)


# -- trajectories ------------------------------------------------------------


class Retention(str, Enum):
    ALL = "all"
    DYADIC = "dyadic"


@dataclass
class Trajectory:
    """Time-ordered snapshots.

    Under dyadic retention every snapshot in the latest octave ``(t/2, t]`` is
    kept; older snapshots are thinned to at most one per geometric bin of
    width ``2**(1/per_octave)``.
    """

    snapshots: list[Field] = field(default_factory=list)
    retention: Retention = Retention.ALL
    per_octave: int = 16
    meta: dict | None = None
    records: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.retention = Retention(self.retention)
        times = [s.time for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must strictly increase")
        if not self.records:
            self.records = [{} for _ in self.snapshots]
        if len(self.records) != len(self.snapshots):
            raise ValueError("one record per snapshot")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def append(self, snap: Field, record: dict | None = None) -> None:
        """Add a snapshot with optional per-snapshot diagnostics."""
        if self.snapshots and snap.time <= self.snapshots[-1].time:
            raise ValueError("snapshot times must strictly increase")
        self.snapshots.append(snap)
        self.records.append(record or {})
        if self.retention is Retention.DYADIC:
            self._thin()

    def _thin(self) -> None:
        t_now = self.snapshots[-1].time
        kept: list[int] = []
        last_bin = None
        # iterate newest-first so each bin keeps its latest member
        for i in range(len(self.snapshots) - 1, -1, -1):
            t = self.snapshots[i].time
            if t > t_now / 2 or t == 0.0:
                kept.append(i)
                continue
            b = math.floor(self.per_octave * math.log2(t))
            if b != last_bin:
                kept.append(i)
                last_bin = b
        kept.reverse()
        self.snapshots = [self.snapshots[i] for i in kept]
        self.records = [self.records[i] for i in kept]

    def at(self, t: float, rtol: float = 1e-12) -> Field:
        for s in self.snapshots:
            if abs(s.time - t) <= rtol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")


def window(traj: Trajectory | Iterable[Field], t: float, minimum: int = 2) -> list[Field]:
    """Snapshots with time in ``(t/2, t]``, sorted by time."""
    snaps = sorted(
        (s for s in traj if t / 2 < s.time <= t * (1 + 1e-12)), key=lambda s: s.time
    )
    if len(snaps) < max(minimum, 1):
        raise WindowError(f"window ({t / 2}, {t}] holds {len(snaps)} snapshots, need {minimum}")
    return snaps
