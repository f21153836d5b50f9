"""Time stepping for the slope ``v = u_x`` and the Picard harness.

Two schemes:

* ``if_imex_spectral`` (periodic grids): first-order exponential integrator.
  The biharmonic part is integrated exactly and the perturbation
  ``d^2 (alpha v_xx + F)`` is frozen over the step.
* ``semi_implicit_fd`` (truncated grids): second-order finite differences in
  flux form with the leading coefficient ``A`` frozen over the step and the
  fourth-order part taken implicitly (pentadiagonal solve). Boundary
  conditions clamp ``v`` to its far-field values and set ``v_x = 0``.

``u`` is recovered from ``v`` by integration; its additive constant is
carried as an anchor (see :func:`reconstruct_u`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .flow import (
    DEFAULT_DELTA0,
    DEFAULT_EPS0,
    BlowUpError,
    CurvatureModel,
    alpha_values,
    check_smallness,
    flux_values,
    fpert_values,
    kappa_values,
)
from .grid import Field, GridError, GridSpec, Retention, Trajectory, derivative_values
from .semigroup import duhamel, semigroup_values


class Scheme(str, Enum):
    IF_IMEX = "if_imex_spectral"
    SEMI_IMPLICIT = "semi_implicit_fd"


class DtPolicy(str, Enum):
    FIXED = "fixed"
    DX_SCALED = "dx-scaled"
    GEOMETRIC = "geometric"


@dataclass
class SolverConfig:
    """Integration settings.

    ``dx-scaled`` uses ``safety * min(dx^4, 0.25)`` (IMEX) or ``safety * dx^2``
    (semi-implicit). ``geometric`` uses ``theta * max(t, t_floor)`` capped by
    ``dt_max``, which keeps the relative step constant on long runs.
    """

    scheme: Scheme = Scheme.IF_IMEX
    dt_policy: DtPolicy = DtPolicy.DX_SCALED
    t_end: float = 1.0
    dt: float | None = None
    safety: float = 1.0
    theta: float = 0.01
    t_floor: float = 1e-3
    dt_max: float = math.inf
    eps0: float = DEFAULT_EPS0
    delta0: float = DEFAULT_DELTA0
    retention: Retention = Retention.ALL
    per_octave: int = 16
    snapshot_times: Sequence[float] | None = None
    snapshot_every: int = 1

    def __post_init__(self) -> None:
        self.scheme = Scheme(self.scheme)
        self.dt_policy = DtPolicy(self.dt_policy)
        self.retention = Retention(self.retention)
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if self.dt_policy is DtPolicy.FIXED and not (self.dt is not None and self.dt > 0):
            raise ValueError("fixed dt policy needs dt > 0")
        if not self.theta > 0 or not self.t_floor > 0 or not self.dt_max > 0:
            raise ValueError("theta, t_floor and dt_max must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.snapshot_times is not None:
            ts = sorted(float(t) for t in self.snapshot_times)
            if any(t <= 0 or t > self.t_end * (1 + 1e-12) for t in ts):
                raise ValueError("snapshot times must lie in (0, t_end]")
            self.snapshot_times = ts

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "dt_policy": self.dt_policy.value,
            "t_end": self.t_end,
            "dt": self.dt,
            "safety": self.safety,
            "theta": self.theta,
            "t_floor": self.t_floor,
            "dt_max": None if math.isinf(self.dt_max) else self.dt_max,
            "eps0": self.eps0,
            "delta0": self.delta0,
            "retention": self.retention.value,
            "per_octave": self.per_octave,
            "snapshot_times": None if self.snapshot_times is None else list(self.snapshot_times),
            "snapshot_every": self.snapshot_every,
        }

    def nominal_dt(self, grid: GridSpec, t: float) -> float:
        if self.dt_policy is DtPolicy.FIXED:
            return float(self.dt)
        if self.dt_policy is DtPolicy.GEOMETRIC:
            return min(self.dt_max, self.theta * max(t, self.t_floor))
        if self.scheme is Scheme.IF_IMEX:
            return self.safety * min(grid.dx**4, 0.25)
        return self.safety * grid.dx**2


# -- IMEX step (periodic) ----------------------------------------------------


def _phi1(z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    nz = z > 0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def step_if_imex(v: Field, dt: float, model: CurvatureModel) -> Field:
    """``v <- e^{-dt d^4} v + int_0^dt e^{-(dt-s) d^4} d^2 g ds`` with ``g`` frozen."""
    grid = v.grid
    if not grid.periodic:
        raise GridError("the IMEX scheme needs a periodic grid")
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return v
    k = grid.wavenumbers
    k2 = k * k
    z = dt * k2 * k2
    vhat = np.fft.fft(v.values)
    vx = np.real(np.fft.ifft(1j * k * vhat * _nyquist_mask(grid)))
    vxx = np.real(np.fft.ifft(-k2 * vhat))
    g = alpha_values(v.values, vx, model) * vxx + fpert_values(v.values, vx, model)
    new_hat = np.exp(-z) * vhat - dt * k2 * _phi1(z) * np.fft.fft(g)
    out = np.real(np.fft.ifft(new_hat))
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite state after step at t={v.time}")
    return v.replace(values=out, time=v.time + dt)


def _nyquist_mask(grid: GridSpec) -> np.ndarray:
    m = np.ones(grid.n)
    if grid.n % 2 == 0:
        m[grid.n // 2] = 0.0
    return m


# -- semi-implicit step (truncated) ------------------------------------------


def _ghosted(values: np.ndarray) -> np.ndarray:
    # even reflection about each end node enforces v_x = 0 there
    return np.concatenate(([values[1]], values, [values[-2]]))


def _fd_state(values: np.ndarray, dx: float, model: CurvatureModel):
    ve = _ghosted(values)
    d2 = (ve[2:] - 2.0 * ve[1:-1] + ve[:-2]) / dx**2
    d1 = (ve[2:] - ve[:-2]) / (2.0 * dx)
    kappa = kappa_values(values, d1)
    model.guard(kappa)
    fp = model.fp(-kappa)
    a_coef = fp / (1.0 + values**2) ** 2
    g = flux_values(values, d1, d2, model)
    return a_coef, g


def _pentadiagonal_bands(a_coef: np.ndarray, dt: float, dx: float) -> np.ndarray:
    """Banded form (2 sub, 2 super) of ``I + dt D2 diag(A) D2`` on interior nodes.

    End-node increments are zero; reflected ghosts fold into the diagonal of
    the first and last rows.
    """
    a = np.asarray(a_coef, dtype=float)
    lo, mid, hi = a[:-2], a[1:-1], a[2:]
    s = dt / dx**4
    c_m2, c_p2 = lo, hi
    c_m1 = -2.0 * (lo + mid)
    c_p1 = -2.0 * (mid + hi)
    c0 = lo + 4.0 * mid + hi
    c0[0] += lo[0]
    c0[-1] += hi[-1]
    m = len(mid)
    ab = np.zeros((5, m))
    ab[0, 2:] = s * c_p2[: m - 2]
    ab[1, 1:] = s * c_p1[: m - 1]
    ab[2, :] = 1.0 + s * c0
    ab[3, :-1] = s * c_m1[1:]
    ab[4, :-2] = s * c_m2[2:]
    return ab


def _semi_implicit_core(values: np.ndarray, dt: float, dx: float, model: CurvatureModel):
    a_coef, g = _fd_state(values, dx, model)
    rhs = dt * (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx**2
    ab = _pentadiagonal_bands(a_coef, dt, dx)
    w = solve_banded((2, 2), ab, rhs)
    out = values.copy()
    out[1:-1] += w
    return out, g


def step_semi_implicit(v: Field, dt: float, model: CurvatureModel) -> Field:
    """``(I + dt D2 A^n D2) w = dt D2 G(v^n)``, ``v <- v + w``.

    The end values of ``v`` are held fixed (far-field slopes).
    """
    if v.grid.periodic:
        raise GridError("the semi-implicit scheme is for truncated grids")
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return v
    out, _ = _semi_implicit_core(np.array(v.values), dt, v.grid.dx, model)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite state after step at t={v.time}")
    return v.replace(values=out, time=v.time + dt)


# -- reconstruction of u -----------------------------------------------------


def u_anchor(u: Field, v: Field | None = None) -> float:
    """Additive constant carried alongside ``v``.

    Periodic grids: discrete mean of ``u - c x`` with ``c`` the mean of ``v``
    (``v`` is required there). Truncated grids: trapezoid integral of ``u``.
    """
    grid = u.grid
    if grid.periodic:
        if v is None:
            raise ValueError("periodic anchor needs the slope field v")
        c = float(np.mean(v.values))
        return float(np.mean(u.values - c * grid.x))
    return float(sp_integrate.trapezoid(u.values, grid.x))


def reconstruct_u(v: Field, anchor: float) -> Field:
    """``u`` with ``u_x = v`` and the given anchor (see :func:`u_anchor`)."""
    grid = v.grid
    vals = np.asarray(v.values)
    if grid.periodic:
        c = float(np.mean(vals))
        k = grid.wavenumbers
        hat = np.fft.fft(vals - c)
        with np.errstate(divide="ignore", invalid="ignore"):
            anti = np.where(k != 0, hat / (1j * k), 0.0)
        if grid.n % 2 == 0:
            anti[grid.n // 2] = 0.0
        p = np.real(np.fft.ifft(anti))
        # p has zero mean, so mean(u - c x) equals the anchor
        u = c * grid.x + p + anchor
        return v.replace(values=u, label="u")
    # spline antiderivative: fourth order, unlike a cumulative trapezoid
    cum = CubicSpline(grid.x, vals).antiderivative()(grid.x)
    cum = cum - cum[0]
    width = grid.x[-1] - grid.x[0]
    shift = (anchor - sp_integrate.trapezoid(cum, grid.x)) / width
    return v.replace(values=cum + shift, label="u")


# -- integration -------------------------------------------------------------


def _record(v: Field, model: CurvatureModel, config: SolverConfig, anchor: float | None, step: int) -> dict:
    vx = derivative_values(v.values, v.grid, 1)
    rep = check_smallness(v, v.replace(values=vx), config.eps0, model)
    rec = {
        "step": step,
        "smallness": rep.to_dict(),
        "alpha_ok": bool(rep.sup_alpha < config.delta0),
        "mass": float(np.mean(v.values)) if v.grid.periodic else float(sp_integrate.trapezoid(v.values, v.grid.x)),
    }
    if anchor is not None:
        rec["anchor"] = anchor
    return rec


def integrate(initial: Field, config: SolverConfig, model: CurvatureModel,
              anchor: float | None = None) -> Trajectory:
    """Integrate the slope ``v`` from ``initial`` to ``config.t_end``.

    Each snapshot carries a record with a smallness report, the mass (mean of
    ``v`` on periodic grids, its integral otherwise) and, when ``anchor`` is
    given, the evolving anchor needed by :func:`reconstruct_u`. On blow-up a
    :class:`BlowUpError` is raised with ``.trajectory`` holding what was
    computed, including a diagnostic snapshot when one is available.
    """
    grid = initial.grid
    if config.scheme is Scheme.IF_IMEX and not grid.periodic:
        raise GridError("if_imex_spectral needs a periodic grid")
    if config.scheme is Scheme.SEMI_IMPLICIT and grid.periodic:
        raise GridError("semi_implicit_fd needs a truncated grid")
    traj = Trajectory(retention=config.retention, per_octave=config.per_octave,
                      meta={"config": config.to_dict(), "model": model.to_dict(), "grid": grid.to_dict()})
    v = initial.replace(label="v")
    t0 = v.time
    t_end = t0 + config.t_end
    targets = [t0 + t for t in config.snapshot_times] if config.snapshot_times is not None else None
    step = 0
    traj.append(v, _record(v, model, config, anchor, step))
    dx = grid.dx
    next_target = 0
    while v.time < t_end * (1 - 1e-14):
        t = v.time
        dt = config.nominal_dt(grid, t - t0)
        stop = targets[next_target] if targets and next_target < len(targets) else t_end
        if t + dt >= stop * (1 - 1e-14):
            dt = stop - t
            hit = True
        else:
            hit = False
        prev_sup = v.sup()
        try:
            if config.scheme is Scheme.IF_IMEX:
                new = step_if_imex(v, dt, model)
                new_anchor = anchor
            else:
                vals, g = _semi_implicit_core(np.array(v.values), dt, dx, model)
                if not np.all(np.isfinite(vals)):
                    raise BlowUpError(f"non-finite state after step at t={t}")
                new = v.replace(values=vals, time=t + dt)
                new_anchor = None if anchor is None else anchor + dt * (g[-1] - g[0])
            if prev_sup > 1e-300 and new.sup() > 2.0 * prev_sup:
                raise BlowUpError(f"sup|v| more than doubled in one step at t={t}", new)
        except BlowUpError as exc:
            exc.trajectory = traj
            if exc.snapshot is None:
                exc.snapshot = v
            raise
        if hit:
            new = new.replace(time=stop)
            next_target += 1
        v, anchor = new, new_anchor
        step += 1
        if targets is not None:
            if hit:
                traj.append(v, _record(v, model, config, anchor, step))
        elif step % config.snapshot_every == 0 or v.time >= t_end * (1 - 1e-14):
            traj.append(v, _record(v, model, config, anchor, step))
    traj.meta["steps"] = step
    return traj


# -- Picard harness ----------------------------------------------------------


@dataclass
class PicardReport:
    distances: list[float]
    factors: list[float]
    horizon: float
    iterations: int
    converged: bool
    diverged: bool = False
    times: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "distances": self.distances,
            "factors": self.factors,
            "horizon": self.horizon,
            "iterations": self.iterations,
            "converged": self.converged,
            "diverged": self.diverged,
        }


def picard_local(v0: Field, T: float, max_iters: int, model: CurvatureModel,
                 n_times: int = 32, tol: float = 1e-14) -> PicardReport:
    """Fixed-point iteration of the mild formulation on ``[0, T]``.

    ``v^{n+1}(t) = e^{-t d^4} v0 + int_0^t d^2 e^{-(t-s) d^4} g^n(s) ds`` with
    ``g^n = alpha(v^n) v^n_xx + F(v^n)``. The iteration starts from the free
    evolution. Distances are space-time sup-norms of successive differences.
    """
    grid = v0.grid
    if not grid.periodic:
        raise GridError("picard_local needs a periodic grid")
    if not T > 0 or max_iters < 1:
        raise ValueError("need T > 0 and max_iters >= 1")
    eps = np.finfo(float).eps
    times = np.linspace(0.0, T, n_times + 1)
    free = [v0.values if s == 0 else semigroup_values(v0.values, grid, s) for s in times]
    current = [np.array(f) for f in free]
    distances: list[float] = []
    factors: list[float] = []
    streak = 0
    converged = diverged = False
    if v0.sup() == 0.0:
        return PicardReport([], [], T, 0, True, False, times.tolist())
    it = 0
    for it in range(1, max_iters + 1):
        forcing = []
        for s, vals in zip(times, current):
            vx = derivative_values(vals, grid, 1)
            vxx = derivative_values(vals, grid, 2)
            g = alpha_values(vals, vx, model) * vxx + fpert_values(vals, vx, model)
            forcing.append((float(s), Field(grid, g, float(s), "g")))
        nxt = [free[0]]
        for j in range(1, len(times)):
            nxt.append(free[j] + duhamel(forcing[: j + 1], float(times[j]), deriv=2).values)
        dist = float(max(np.max(np.abs(a - b)) for a, b in zip(nxt, current)))
        if distances and distances[-1] > 10 * eps:
            fac = dist / distances[-1]
            factors.append(fac)
            streak = streak + 1 if fac >= 1 else 0
        distances.append(dist)
        current = nxt
        if dist < tol:
            converged = True
            break
        if streak >= 3:
            diverged = True
            break
    return PicardReport(distances, factors, T, it, converged, diverged, times.tolist())
