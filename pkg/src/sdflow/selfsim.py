"""Ramp data, rescaling ``u^sigma(x, t) = u(sigma x, sigma^4 t) / sigma`` and profiles.

A self-similar solution has the form ``U(x, t) = t^(1/4) Phi(x t^(-1/4))``.
Ramp data have slope ``b`` on the left and ``a`` on the right. On periodic
grids the ramp is reflected: a second transition ``a -> b`` sits at the seam
``x = +-L`` so that the slope is periodic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .flow import CurvatureModel, linear_model
from .grid import Field, GridError, GridSpec, Trajectory, interpolate
from .semigroup import kernel_quadrature
from .solver import SolverConfig, integrate, reconstruct_u

RAMP_SLOPE_LIMIT = 0.3
# int_0^1 of the quintic step s(z) - 1 over z > 0, times -1 (see _step_integral)
_STEP_OFFSET = 0.15625


def smoothstep(z) -> np.ndarray:
    """Quintic step: 0 for z <= -1, 1 for z >= 1, C^2 in between."""
    tau = np.clip((np.asarray(z, dtype=float) + 1.0) / 2.0, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _step_integral(x, w: float) -> np.ndarray:
    # int_0^x s(xi / w) dxi, shifted so that it equals x^+ far from the origin
    x = np.asarray(x, dtype=float)
    tau = np.clip((x / w + 1.0) / 2.0, 0.0, 1.0)
    prim = tau**6 - 3.0 * tau**5 + 2.5 * tau**4
    inner = 2.0 * w * (prim - 0.078125) + _STEP_OFFSET * w
    return np.where(x >= w, x, np.where(x <= -w, 0.0, inner))


@dataclass(frozen=True)
class RampSpec:
    a: float
    b: float
    w: float = 1.0

    def __post_init__(self) -> None:
        if abs(self.a) > RAMP_SLOPE_LIMIT or abs(self.b) > RAMP_SLOPE_LIMIT:
            raise ValueError(f"ramp slopes must satisfy |a|, |b| <= {RAMP_SLOPE_LIMIT}")
        if not self.w > 0:
            raise ValueError("smoothing width must be positive")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "w": self.w}

    def slope(self, x) -> np.ndarray:
        return self.b + (self.a - self.b) * smoothstep(np.asarray(x, dtype=float) / self.w)

    def height(self, x) -> np.ndarray:
        """Smoothed ramp ``u0``; equals ``a x^+ + b x^-`` for ``|x| >= w``."""
        x = np.asarray(x, dtype=float)
        return self.b * x + (self.a - self.b) * _step_integral(x, self.w)

    def exact(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, self.a * x, self.b * x)


def ramp_initial(ramp: RampSpec, grid: GridSpec) -> tuple[Field, float]:
    """Initial slope field and the anchor that fixes ``u`` (see ``reconstruct_u``)."""
    x = grid.x
    if grid.periodic:
        L = grid.half_length
        if ramp.w > L / 4:
            raise GridError("smoothing width too large for the periodic box")
        s = lambda z: smoothstep(z / ramp.w)  # noqa: E731
        seam = np.where(x >= 0, s(L - x) - 1.0, 1.0 - s(L + x))
        v0 = Field(grid, ramp.b + (ramp.a - ramp.b) * (s(x) + seam), 0.0, "v")
        u = reconstruct_u(v0, 0.0)
        # match u0 near the origin to the line ramp
        i0 = int(np.argmin(np.abs(x)))
        shift = float(ramp.height(x[i0]) - u.values[i0])
        c = float(np.mean(v0.values))
        return v0, float(np.mean(u.values + shift - c * x))
    v0 = Field(grid, ramp.slope(x), 0.0, "v")
    from scipy.integrate import trapezoid

    return v0, float(trapezoid(ramp.height(x), x))


def u_field(traj: Trajectory, i: int) -> Field:
    """``u`` for snapshot ``i`` of a slope trajectory (or the snapshot itself if it is ``u``)."""
    snap = traj[i]
    if snap.label == "u":
        return snap
    rec = traj.records[i]
    if "anchor" not in rec:
        raise ValueError("trajectory carries no anchor; integrate with anchor=...")
    return reconstruct_u(snap, rec["anchor"])


def _interp_u(traj: Trajectory, i: int, xs: np.ndarray) -> np.ndarray:
    u = u_field(traj, i)
    if not u.grid.periodic:
        return interpolate(u, xs)
    # u = c x + periodic part; interpolate only the periodic part
    snap = traj[i]
    c = float(np.mean(snap.values)) if snap.label != "u" else 0.0
    per = u.replace(values=u.values - c * u.grid.x)
    return interpolate(per, xs) + c * xs


def _index_at(traj: Trajectory, t: float, rtol: float = 1e-10) -> int:
    for i, s in enumerate(traj.snapshots):
        if abs(s.time - t) <= rtol * max(1.0, abs(t)):
            return i
    raise KeyError(f"no snapshot at t={t}")


@dataclass
class Profile:
    ys: np.ndarray
    values: np.ndarray
    t: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.ys = np.asarray(self.ys, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.ys.shape != self.values.shape:
            raise ValueError("ys and values must match")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")
        self._spline = CubicSpline(self.ys, self.values)

    def __call__(self, y, deriv: int = 0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y < self.ys[0] - 1e-12) or np.any(y > self.ys[-1] + 1e-12):
            raise ValueError("profile evaluated outside its range")
        return self._spline(y, deriv)

    def solution(self, x, t, deriv: int = 0) -> np.ndarray:
        """``d_x^deriv of t^(1/4) Phi(x t^(-1/4))``."""
        s = t ** 0.25
        return s ** (1 - deriv) * self(np.asarray(x) / s, deriv)


def extract_profile(traj: Trajectory, t: float, ys: Sequence[float]) -> Profile:
    """``Phi(y) = t^(-1/4) u(t^(1/4) y, t)`` from the snapshot at time ``t``."""
    ys = np.asarray(ys, dtype=float)
    i = _index_at(traj, t)
    grid = traj.grid
    s = t ** 0.25
    xs = s * ys
    lo, hi = grid.x[0], grid.x[-1] if not grid.periodic else grid.half_length
    if np.any(xs < lo) or np.any(xs > hi):
        raise GridError(f"y-window exceeds t^(-1/4) L = {grid.half_length / s:.4g}")
    return Profile(ys, _interp_u(traj, i, xs) / s, t, {"grid": grid.to_dict()})


@dataclass
class RescaledWindow:
    sigma: float
    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray  # shape (len(ts), len(xs))
    deriv: int = 0


def _sample(traj: Trajectory, T: float, X: np.ndarray, deriv: int) -> np.ndarray:
    times = traj.times
    if T < times[0] - 1e-12 * max(1.0, T) or T > times[-1] * (1 + 1e-12):
        raise ValueError(f"time {T} outside the trajectory span")

    def at(i: int) -> np.ndarray:
        if deriv == 0:
            return _interp_u(traj, i, X)
        snap = traj[i]
        if deriv == 1:
            return interpolate(snap, X)
        from .grid import differentiate

        return interpolate(differentiate(snap, deriv - 1), X)

    j = int(np.searchsorted(times, T))
    if j < len(times) and abs(times[j] - T) <= 1e-10 * max(1.0, T):
        return at(j)
    if j > 0 and abs(times[j - 1] - T) <= 1e-10 * max(1.0, T):
        return at(j - 1)
    # linear interpolation in time between neighbouring snapshots
    t0, t1 = times[j - 1], times[j]
    lam = (T - t0) / (t1 - t0)
    return (1 - lam) * at(j - 1) + lam * at(j)


def rescale_solution(traj: Trajectory, sigma: float, xs: Sequence[float], ts: Sequence[float],
                     deriv: int = 0) -> RescaledWindow:
    """Sample ``d_x^deriv u^sigma`` on ``xs x ts``.

    ``u^sigma_x(x, t) = v(sigma x, sigma^4 t)`` and each further derivative
    gains a factor ``sigma``. Space uses the grid interpolant; time is
    interpolated linearly between snapshots (exact when a snapshot sits at
    ``sigma^4 t``).
    """
    if not sigma >= 1:
        raise ValueError("sigma must be >= 1")
    if deriv not in (0, 1, 2):
        raise ValueError("deriv must be 0, 1 or 2")
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    grid = traj.grid
    X = sigma * xs
    hi = grid.half_length if grid.periodic else grid.x[-1]
    if np.any(X < grid.x[0]) or np.any(X > hi):
        raise GridError("sigma * x leaves the computational domain")
    rows = [_sample(traj, sigma**4 * t, X, deriv) * sigma ** (deriv - 1) for t in ts]
    return RescaledWindow(float(sigma), xs, ts, np.array(rows), deriv)


def scaled_model(model: CurvatureModel, sigma: float) -> CurvatureModel:
    """``f_sigma(r) = sigma f(r / sigma)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s = float(sigma)
    base = model
    limit = None if model.kappa_limit is None else model.kappa_limit * s
    params = {"base": base.to_dict(), "sigma": s}
    return CurvatureModel(
        f"{base.name}_sigma{s:g}",
        f=lambda r: s * base.f(np.asarray(r, dtype=float) / s),
        fp=lambda r: base.fp(np.asarray(r, dtype=float) / s),
        fpp=lambda r: base.fpp(np.asarray(r, dtype=float) / s) / s,
        kappa_limit=limit,
        params=params,
    )


# -- linear oracle -----------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _panel_quad(fn, lo: float, hi: float, width: float = 0.5) -> float:
    if hi <= lo:
        return 0.0
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    z = (mid + half * _GL_NODES[None, :]).ravel()
    w = (half * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(fn(z), w))


def _abs_moment(y: float, z_max: float = 40.0) -> float:
    # int bbar(z) |y - z| dz with the kink at z = y split out
    prof = kernel_quadrature().profile
    f = lambda z: prof(z) * np.abs(y - z)  # noqa: E731
    lo, hi = -z_max, z_max
    if lo < y < hi:
        return _panel_quad(f, lo, y) + _panel_quad(f, y, hi)
    return _panel_quad(f, lo, hi)


def linear_profile(ramp: RampSpec, ys: Sequence[float], t: float = 1.0, smoothed: bool = False) -> Profile:
    """Profile of the linearized flow ``u_t = -u_xxxx`` from ramp data.

    With ``smoothed=False`` the data are the exact ramp ``a x^+ + b x^-`` and
    the result is independent of ``t``:
    ``Phi(y) = (a+b)/2 y + (a-b)/2 int bbar(z) |y - z| dz``,
    evaluated by panel Gauss-Legendre quadrature of the kernel convolution.
    With ``smoothed=True`` the smoothed ramp is propagated to time ``t``; the
    difference from the exact ramp is compactly supported on ``[-w, w]``.
    """
    ys = np.asarray(ys, dtype=float)
    mom = np.array([_abs_moment(float(y)) for y in ys])
    vals = 0.5 * (ramp.a + ramp.b) * ys + 0.5 * (ramp.a - ramp.b) * mom
    if smoothed:
        s = t ** 0.25
        prof = kernel_quadrature().profile
        w = ramp.w

        def corr(y: float) -> float:
            d = lambda z: (ramp.height(z) - ramp.exact(z)) * prof((s * y - z) / s) / s  # noqa: E731
            return _panel_quad(d, -w, w, width=w / 4)

        vals = vals + np.array([corr(float(y)) for y in ys]) / s
    return Profile(ys, vals, t, {"ramp": ramp.to_dict(), "smoothed": smoothed})


# -- reference runs and the convergence study --------------------------------


@dataclass
class RampRun:
    ramp: RampSpec
    model: CurvatureModel
    trajectory: Trajectory


def run_ramp(ramp: RampSpec, model: CurvatureModel, grid: GridSpec, config: SolverConfig) -> RampRun:
    v0, anchor = ramp_initial(ramp, grid)
    return RampRun(ramp, model, integrate(v0, config, model, anchor=anchor))


def reference_profile(ramp: RampSpec, grid: GridSpec, t_ref: float, ys: Sequence[float],
                      theta: float = 0.01) -> Profile:
    """Self-similar profile from a long linear-model run extracted at ``t_ref``."""
    cfg = SolverConfig(t_end=t_ref, dt_policy="geometric", theta=theta, snapshot_times=[t_ref])
    run = run_ramp(ramp, linear_model(), grid, cfg)
    return extract_profile(run.trajectory, t_ref, ys)


@dataclass
class ConvergenceRow:
    sigma: float
    sup_u: float
    sup_ux: float
    sup_uxx: float

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "sup_u": self.sup_u, "sup_ux": self.sup_ux, "sup_uxx": self.sup_uxx}


def convergence_study(ramp: RampSpec, model: CurvatureModel, sigmas: Sequence[float],
                      reference: Profile, grid: GridSpec,
                      window: tuple[tuple[float, float], tuple[float, float]] = ((-2.0, 2.0), (0.25, 1.0)),
                      times: Sequence[float] = (0.25, 0.375, 0.5, 0.75, 1.0),
                      nx: int = 81, theta: float = 0.01) -> tuple[list[ConvergenceRow], RampRun]:
    """``sup_K |d_x^l (u^sigma - U)|`` for ``l = 0, 1, 2`` and each ``sigma``.

    All ``u^sigma`` derive from one run of ``model`` from the smoothed ramp:
    rescaling a single solution is the same as solving the ``f_sigma``
    equation from rescaled data, so one run to ``max(sigma)^4 t_max`` serves
    every ``sigma``.
    """
    (x0, x1), _ = window
    xs = np.linspace(x0, x1, nx)
    ts = np.asarray(times, dtype=float)
    snap_times = sorted({float(s) ** 4 * float(t) for s in sigmas for t in ts})
    cfg = SolverConfig(t_end=snap_times[-1], dt_policy="geometric", theta=theta, snapshot_times=snap_times)
    run = run_ramp(ramp, model, grid, cfg)
    rows = []
    for s in sigmas:
        sups = []
        for d in (0, 1, 2):
            got = rescale_solution(run.trajectory, s, xs, ts, d).values
            ref = np.array([reference.solution(xs, t, d) for t in ts])
            sups.append(float(np.max(np.abs(got - ref))))
        rows.append(ConvergenceRow(float(s), *sups))
    return rows, run
