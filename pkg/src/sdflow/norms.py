"""Discrete Hölder seminorms, scaled window norms, Z-norms and decay fits.

All estimators are grid/snapshot maxima, hence lower bounds of the
continuum quantities. The parabolic weight is ``n = 4``: a term with ``l``
space and ``m`` time derivatives has order ``l + 4 m``.

For a window ``(t/2, t]`` of length ``h = t/2`` and ``lam >= 0`` the scaled
norm is

    sum_{l + 4m <= lam} h^(l/4 + m) sup |d_x^l d_t^m f|
      + h^(lam/4) * ( sum_{l + 4m = floor(lam)} [d_x^l d_t^m f]_{C_x^(lam - floor(lam))}
                      + sum_{lam - 4 < l + 4m <= lam} [d_x^l d_t^m f]_{C_t^((lam - l - 4m)/4)} )

with the convention that a seminorm of exponent 0 is the sup norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Field, GridSpec, Trajectory, WindowError, derivative_values, window

N_PARABOLIC = 4
DEFAULT_MU = 0.5

TimeDerivative = Callable[[Field], np.ndarray]


@dataclass(frozen=True)
class HolderSpec:
    lam: float
    n: int = N_PARABOLIC
    scaled: bool = True

    def __post_init__(self) -> None:
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be a finite nonnegative number, got {self.lam}")
        if self.n != N_PARABOLIC:
            raise ValueError("only the parabolic weight n = 4 is supported")

    @property
    def floor(self) -> int:
        return int(math.floor(self.lam + 1e-12))

    @property
    def frac(self) -> float:
        f = self.lam - self.floor
        return 0.0 if f < 1e-12 else f

    def sup_terms(self) -> list[tuple[int, int]]:
        return [(l, m) for m in range(int(self.lam // 4) + 1) for l in range(self.floor + 1) if l + 4 * m <= self.lam + 1e-12]

    def space_terms(self) -> list[tuple[int, int]]:
        return [(l, m) for (l, m) in self.sup_terms() if l + 4 * m == self.floor]

    def time_terms(self) -> list[tuple[int, int, float]]:
        return [
            (l, m, (self.lam - l - 4 * m) / 4)
            for (l, m) in self.sup_terms()
            if self.lam - 4 < l + 4 * m
        ]


@dataclass
class NormReport:
    window: tuple[float, float]
    breakdown: dict[str, float]
    total: float
    t_star: float | None = None

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "breakdown": dict(sorted(self.breakdown.items())),
            "total": self.total,
            "t_star": self.t_star,
        }


@dataclass
class DecayFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    residual: float
    points: int = 0

    def __post_init__(self) -> None:
        if not self.window[0] < self.window[1]:
            raise ValueError("fit window must satisfy t1 < t2")
        if not math.isfinite(self.residual):
            raise ValueError("non-finite fit residual")

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "points": self.points,
        }


# -- seminorms ---------------------------------------------------------------


def _space_seminorm_values(values: np.ndarray, grid: GridSpec, lam: float) -> float:
    values = np.asarray(values, dtype=float)
    if lam == 0:
        return float(np.max(np.abs(values)))
    n, dx = grid.n, grid.dx
    osc = float(np.max(values) - np.min(values))
    if osc == 0.0:
        return 0.0
    max_sep = n // 4 if grid.periodic else n - 1
    best = 0.0
    for s in range(1, max_sep + 1):
        denom = (s * dx) ** lam
        if osc / denom <= best:
            break
        if grid.periodic:
            diff = np.abs(np.roll(values, -s) - values)
        else:
            diff = np.abs(values[s:] - values[:-s])
        best = max(best, float(np.max(diff)) / denom)
    return best


def holder_seminorm_space(field: Field, lam: float) -> float:
    """``sup |f(x) - f(y)| / |x - y|^lam`` over grid pairs.

    On periodic grids separations are measured periodically and limited to
    ``L/2``. Separations are scanned in increasing order and the scan stops
    once ``osc(f) / sep^lam`` cannot beat the current maximum.
    """
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    return _space_seminorm_values(field.values, field.grid, lam)


def holder_seminorm_time(snapshots: Sequence[Field], mu: float, x_index: int | None = None) -> float:
    """``sup |f(x, s) - f(x, t)| / |s - t|^mu`` over snapshot pairs (and x)."""
    if not 0 <= mu < 1:
        raise ValueError("mu must lie in [0, 1)")
    snaps = list(snapshots)
    if len(snaps) < 2:
        raise WindowError("need at least two snapshots")
    if mu == 0:
        return float(max(np.max(np.abs(s.values if x_index is None else s.values[x_index])) for s in snaps))
    best = 0.0
    for i in range(len(snaps)):
        for j in range(i + 1, len(snaps)):
            a, b = snaps[i].values, snaps[j].values
            d = abs(a[x_index] - b[x_index]) if x_index is not None else float(np.max(np.abs(a - b)))
            best = max(best, d / abs(snaps[j].time - snaps[i].time) ** mu)
    return float(best)


# -- window evaluation with caching -----------------------------------------


class _Evaluator:
    """Per-snapshot derivatives, sups and seminorms, computed once."""

    def __init__(self, snapshots: Sequence[Field], derivs_by: str = "auto",
                 time_derivative: TimeDerivative | None = None):
        self.snaps = list(snapshots)
        self.times = np.array([s.time for s in self.snaps])
        self.scheme = derivs_by
        self.time_derivative = time_derivative
        self._vals: dict[tuple[int, int, int], np.ndarray] = {}
        self._sup: dict[tuple[int, int, int], float] = {}
        self._space: dict[tuple[int, int, int, float], float] = {}
        self._pair: dict[tuple[int, int, int, int], float] = {}

    def values(self, i: int, l: int, m: int) -> np.ndarray:
        key = (i, l, m)
        if key not in self._vals:
            snap = self.snaps[i]
            if m == 0:
                base = snap.values
            elif m == 1:
                base = self._time_derivative(i)
            else:
                raise ValueError("time derivatives of order > 1 are not supported")
            self._vals[key] = derivative_values(base, snap.grid, l, self.scheme) if l else np.asarray(base)
        return self._vals[key]

    def _time_derivative(self, i: int) -> np.ndarray:
        if self.time_derivative is not None:
            return np.asarray(self.time_derivative(self.snaps[i]))
        if len(self.snaps) < 2:
            raise WindowError("time derivative by differencing needs two snapshots")
        stack = np.array([s.values for s in self.snaps])
        return np.gradient(stack, self.times, axis=0)[i]

    def sup(self, i: int, l: int, m: int) -> float:
        key = (i, l, m)
        if key not in self._sup:
            self._sup[key] = float(np.max(np.abs(self.values(i, l, m))))
        return self._sup[key]

    def space(self, i: int, l: int, m: int, lam: float) -> float:
        key = (i, l, m, lam)
        if key not in self._space:
            self._space[key] = _space_seminorm_values(self.values(i, l, m), self.snaps[i].grid, lam)
        return self._space[key]

    def pair(self, i: int, j: int, l: int, m: int) -> float:
        key = (i, j, l, m)
        if key not in self._pair:
            self._pair[key] = float(np.max(np.abs(self.values(i, l, m) - self.values(j, l, m))))
        return self._pair[key]

    def window_indices(self, t: float) -> list[int]:
        idx = [i for i, s in enumerate(self.times) if t / 2 < s <= t * (1 + 1e-12)]
        return idx


def _terms(ev: _Evaluator, idx: list[int], t: float, spec: HolderSpec, shift: int = 0,
           prefix: str = "") -> dict[str, float]:
    h = t / 2
    out: dict[str, float] = {}
    for l, m in spec.sup_terms():
        val = max(ev.sup(i, l + shift, m) for i in idx)
        out[f"{prefix}sup[l={l},m={m}]"] = float(h ** (l / 4 + m) * val)
    top = h ** (spec.lam / 4)
    for l, m in spec.space_terms():
        if spec.frac == 0:
            val = max(ev.sup(i, l + shift, m) for i in idx)
        else:
            val = max(ev.space(i, l + shift, m, spec.frac) for i in idx)
        out[f"{prefix}x[l={l},m={m},exp={spec.frac:g}]"] = float(top * val)
    for l, m, mu in spec.time_terms():
        if mu == 0:
            val = max(ev.sup(i, l + shift, m) for i in idx)
        else:
            val = 0.0
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    i, j = idx[a], idx[b]
                    val = max(val, ev.pair(i, j, l + shift, m) / (ev.times[j] - ev.times[i]) ** mu)
        out[f"{prefix}t[l={l},m={m},exp={mu:g}]"] = float(top * val)
    return out


def _need_window(idx: list[int], t: float) -> None:
    if len(idx) < 2:
        raise WindowError(f"window ({t / 2}, {t}] holds {len(idx)} snapshots, need 2")


def scaled_norm(traj: Trajectory | Iterable[Field], t: float, lam: float, derivs_by: str = "auto",
                time_derivative: TimeDerivative | None = None) -> NormReport:
    """Scaled Hölder norm over the window ``(t/2, t]``.

    Time derivatives (terms with ``m >= 1``) use ``time_derivative`` when
    given (e.g. the model right side) and snapshot differencing otherwise.
    """
    spec = HolderSpec(lam)
    snaps = window(traj, t, minimum=2)
    ev = _Evaluator(snaps, derivs_by, time_derivative)
    idx = list(range(len(snaps)))
    terms = _terms(ev, idx, t, spec)
    return NormReport((t / 2, t), terms, float(sum(terms.values())))


def z_norm(traj: Trajectory | Sequence[Field], k: int = 2, mu: float = DEFAULT_MU,
           T: float | None = None, derivs_by: str = "auto") -> NormReport:
    """``sup_t ( ||v||'_{k+mu} + (1+t)^(1/4) ||v_x||'_{k-1+mu} )`` over windows ``(t/2, t]``.

    ``t`` ranges over snapshot times up to ``T`` whose window holds at least
    two snapshots. ``v_x`` is obtained by differentiating each snapshot.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    snaps = [s for s in traj if T is None or s.time <= T * (1 + 1e-12)]
    snaps = [s for s in snaps if s.time > 0]
    ev = _Evaluator(snaps, derivs_by)
    spec_v, spec_vx = HolderSpec(k + mu), HolderSpec(k - 1 + mu)
    best: NormReport | None = None
    for t in ev.times:
        idx = ev.window_indices(t)
        if len(idx) < 2:
            continue
        terms = _terms(ev, idx, t, spec_v, 0, "v:")
        weight = (1.0 + t) ** 0.25
        terms.update({k_: float(weight * v) for k_, v in _terms(ev, idx, t, spec_vx, 1, "vx:").items()})
        total = float(sum(terms.values()))
        if best is None or total > best.total:
            best = NormReport((t / 2, t), terms, total, float(t))
    if best is None:
        raise WindowError("no window with two snapshots; trajectory span too short")
    return best


def decay_fit(series: Sequence[tuple[float, float]], window: tuple[float, float]) -> DecayFit:
    """Least-squares slope of ``log(value)`` against ``log(t)`` on ``window``."""
    t1, t2 = float(window[0]), float(window[1])
    if not 0 < t1 < t2:
        raise ValueError("need 0 < t1 < t2")
    pts = [(float(t), float(v)) for t, v in series if t1 <= t <= t2]
    if len(pts) < 5:
        raise ValueError(f"need at least 5 points in the window, got {len(pts)}")
    ts, vs = np.array(pts).T
    if np.any(vs <= 0) or not np.all(np.isfinite(vs)):
        raise ValueError("values must be positive and finite")
    x, y = np.log(ts), np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (intercept + slope * x)) ** 2)))
    return DecayFit((t1, t2), float(slope), float(intercept), resid, len(pts))
