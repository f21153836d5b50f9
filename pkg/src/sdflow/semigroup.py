"""The biharmonic heat kernel and the semigroup ``exp(-t d^4/dx^4)``.

The similarity profile is

    bbar(y) = (1/pi) * int_0^inf exp(-xi^4) cos(y xi) dxi,

and ``b(x, t) = t**-0.25 * bbar(x * t**-0.25)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, signal

from .grid import Field, GridError, GridSpec, derivative_values


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def _xi_max(tol: float, order: int = 0) -> float:
    # smallest xi beyond which xi^order exp(-xi^4) < tol/100
    xi = math.log(100.0 / tol) ** 0.25
    for _ in range(50):
        nxt = (math.log(100.0 / tol) + order * math.log(max(xi, 1.0))) ** 0.25
        if abs(nxt - xi) < 1e-12:
            break
        xi = nxt
    return xi


def kernel_profile(y: float, tol: float = 1e-12, order: int = 0) -> float:
    """``d^order/dy^order bbar(y)`` by adaptive oscillatory quadrature."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    xi_max = _xi_max(tol, order)
    # d^l/dy^l cos(y xi) = xi^l cos(y xi + l pi/2)
    if order % 2 == 0:
        weight, sign = "cos", (-1) ** (order // 2)
    else:
        weight, sign = "sin", (-1) ** ((order + 1) // 2)
    val, err = integrate.quad(
        lambda xi: xi**order * math.exp(-(xi**4)),
        0.0,
        xi_max,
        weight=weight,
        wvar=abs(y),
        epsabs=tol * math.pi / 10,
        epsrel=0.0,
        limit=400,
    )
    if err > tol * math.pi:
        raise QuadratureError(f"bbar quadrature at y={y}: error {err / math.pi:.2e} > {tol:.1e}")
    if order % 2 == 1 and y < 0:
        val = -val  # odd derivatives of an even function
    return sign * val / math.pi


def kernel(x: float, t: float, tol: float = 1e-12) -> float:
    if not t > 0:
        raise ValueError("kernel needs t > 0")
    s = t ** -0.25
    return s * kernel_profile(x * s, tol)


class KernelQuadrature:
    """Vectorised Gauss-Legendre evaluation of ``bbar``, its derivatives and CDF.

    Beyond ``|y| > y_cut`` the profile is below 1e-24 and is treated as zero
    (the CDF as 0 or 1).
    """

    def __init__(self, y_cut: float = 64.0, tol: float = 1e-15, chunk: int = 4096):
        self.y_cut = float(y_cut)
        self.chunk = chunk
        self.xi_max = _xi_max(tol, 4)
        n = int(80 + 1.5 * self.xi_max * self.y_cut)
        nodes, weights = np.polynomial.legendre.leggauss(n)
        self.xi = 0.5 * self.xi_max * (nodes + 1.0)
        self.gl = 0.5 * self.xi_max * weights
        self.decay = np.exp(-(self.xi**4))
        self.w = self.gl * self.decay / math.pi

    def _apply(self, y, fn) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        out = np.empty_like(flat)
        for start in range(0, flat.size, self.chunk):
            out[start : start + self.chunk] = fn(flat[start : start + self.chunk])
        return out.reshape(y.shape)

    def profile(self, y, order: int = 0) -> np.ndarray:
        def fn(yy):
            inside = np.abs(yy) <= self.y_cut
            phase = np.multiply.outer(np.where(inside, yy, 0.0), self.xi) + order * math.pi / 2
            return np.where(inside, np.cos(phase) @ (self.w * self.xi**order), 0.0)

        return self._apply(y, fn)

    def cdf(self, y) -> np.ndarray:
        """``int_{-inf}^y bbar``."""

        def fn(yy):
            yc = np.clip(yy, -self.y_cut, self.y_cut)
            # sin(y xi)/xi written via sinc to stay finite at xi -> 0
            inner = 0.5 + (np.sinc(np.multiply.outer(yc, self.xi) / math.pi) @ self.w) * yc
            return np.where(yy > self.y_cut, 1.0, np.where(yy < -self.y_cut, 0.0, inner))

        return self._apply(y, fn)

    def moment_abs(self, y) -> np.ndarray:
        """``int bbar(w) |y - w| dw`` from the Fourier representation of ``|x|``.

        Uses ``(2/pi) int_0^inf (1 - cos(y xi) exp(-xi^4)) / xi^2 dxi``.
        """
        xi, e = self.xi, self.decay

        def fn(yy):
            yx = np.multiply.outer(yy, xi)
            integrand = -np.expm1(-(xi**4)) / xi**2 + e * 2.0 * np.sin(yx / 2) ** 2 / xi**2
            # tail beyond xi_max where exp(-xi^4) vanishes: int 1/xi^2
            return (2.0 / math.pi) * (integrand @ self.gl + 1.0 / self.xi_max)

        if np.any(np.abs(np.asarray(y)) > self.y_cut):
            raise ValueError(f"|y| exceeds {self.y_cut}")
        return self._apply(y, fn)


@lru_cache(maxsize=1)
def kernel_quadrature() -> KernelQuadrature:
    return KernelQuadrature()


@dataclass(frozen=True)
class KernelTable:
    ys: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    tol: float

    @classmethod
    def build(cls, y_range: float = 12.0, step: float = 0.01, tol: float = 1e-12) -> "KernelTable":
        n = int(round(2 * y_range / step)) + 1
        ys = np.linspace(-y_range, y_range, n)
        quad = kernel_quadrature()
        return cls(ys, quad.profile(ys), quad.profile(ys, 1), tol)

    def mass(self) -> float:
        return float(integrate.trapezoid(self.values, self.ys))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values[::-1])))


@dataclass(frozen=True)
class KernelBoundReport:
    order: int
    C: float
    omega: float
    residual: float
    dominated: bool


def fit_kernel_bound(order: int, y_max: float = 12.0, step: float = 0.01,
                     max_residual: float = 2.0) -> KernelBoundReport:
    """Fit ``|d^l bbar(y)| <= C exp(-omega |y|^(4/3))`` on ``[0, y_max]``.

    omega comes from a least-squares fit of log peak heights against
    ``y^(4/3)``; C is then raised until the envelope dominates every sample.
    """
    if not 0 <= order <= 4:
        raise ValueError("order must be in 0..4")
    ys = np.arange(0.0, y_max + step / 2, step)
    vals = np.abs(kernel_quadrature().profile(ys, order))
    interior = (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
    peaks = np.flatnonzero(interior) + 1
    if vals[0] >= vals[1]:
        peaks = np.concatenate([[0], peaks])
    peaks = peaks[vals[peaks] > 1e-14]
    if len(peaks) < 3:
        raise QuadratureError("too few envelope peaks to fit a bound")
    z = ys[peaks] ** (4.0 / 3.0)
    slope, intercept = np.polyfit(z, np.log(vals[peaks]), 1)
    omega = -slope
    resid = float(np.sqrt(np.mean((np.log(vals[peaks]) - (intercept + slope * z)) ** 2)))
    if not omega > 0 or resid > max_residual:
        raise QuadratureError(f"kernel envelope fit failed (omega={omega}, residual={resid})")
    C = float(np.max(vals * np.exp(omega * ys ** (4.0 / 3.0))))
    dominated = bool(np.all(vals <= C * np.exp(-omega * ys ** (4.0 / 3.0)) * (1 + 1e-12)))
    return KernelBoundReport(order, C, float(omega), resid, dominated)


# -- semigroup ---------------------------------------------------------------


def _multiplier(grid: GridSpec, t: float) -> np.ndarray:
    return np.exp(-t * grid.wavenumbers**4)


def _convolve_truncated(values: np.ndarray, grid: GridSpec, t: float) -> np.ndarray:
    n, dx = grid.n, grid.dx
    s = t ** -0.25
    offsets = dx * np.arange(-(n - 1), n)
    quad = kernel_quadrature()
    kern = s * quad.profile(np.abs(offsets) * s)
    weights = np.full(n, dx)
    weights[0] = weights[-1] = dx / 2
    inner = signal.fftconvolve(values * weights, kern, mode="valid") if n > 64 else np.convolve(
        values * weights, kern, mode="valid"
    )
    x = grid.x
    left = values[0] * (1.0 - quad.cdf((x - x[0]) * s))
    right = values[-1] * quad.cdf((x - x[-1]) * s)
    # Euler-Maclaurin end term of the trapezoid rule: -dx^2/12 [(v k)']_{x0}^{x_{n-1}}
    # with k(z) = b(x - z), so k'(z) = -s^2 bbar'((x - z) s)
    dv0 = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx)
    dv1 = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dx)
    k0, k1 = s * quad.profile((x - x[0]) * s), s * quad.profile((x - x[-1]) * s)
    dk0 = -s * s * quad.profile((x - x[0]) * s, 1)
    dk1 = -s * s * quad.profile((x - x[-1]) * s, 1)
    corr = -(dx * dx / 12.0) * ((values[-1] * dk1 + dv1 * k1) - (values[0] * dk0 + dv0 * k0))
    return inner + left + right + corr


def semigroup_values(values: np.ndarray, grid: GridSpec, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    if t == 0:
        return np.array(values, dtype=float)
    if grid.periodic:
        return np.real(np.fft.ifft(_multiplier(grid, t) * np.fft.fft(values)))
    return _convolve_truncated(np.asarray(values, dtype=float), grid, t)


def apply_semigroup(field: Field, t: float) -> Field:
    """``exp(-t d^4) field``; the result keeps the input's time stamp."""
    return field.replace(values=semigroup_values(field.values, field.grid, t))


def duhamel(forcing: Sequence[tuple[float, Field]], t: float, deriv: int = 0) -> Field:
    """``d^deriv/dx^deriv int_0^t exp(-(t-s) d^4) g(s) ds``.

    Composite trapezoid over the forcing's own sample times. For ``deriv == 2``
    the final subinterval is propagated analytically with the forcing frozen
    at its left end, which sidesteps the ``(t-s)^(-1/2)`` singularity.
    """
    if deriv not in (0, 1, 2):
        raise ValueError("deriv must be 0, 1 or 2")
    times = np.array([s for s, _ in forcing], dtype=float)
    if len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("forcing samples must be strictly ordered (at least two)")
    span_tol = 1e-12 * max(1.0, t)
    if times[0] > span_tol or abs(times[-1] - t) > span_tol:
        raise ValueError(f"forcing samples span [{times[0]}, {times[-1]}], need [0, {t}]")
    grid = forcing[0][1].grid
    for _, g in forcing:
        if g.grid != grid:
            raise GridError("forcing fields live on different grids")
    gvals = [g.values for _, g in forcing]
    h = np.diff(times)
    frozen_last = deriv == 2
    n_trap = len(times) - 1 - (1 if frozen_last else 0)

    if grid.periodic:
        k4 = grid.wavenumbers**4
        acc = np.zeros(grid.n, dtype=complex)
        for i in range(n_trap):
            for j, wgt in ((i, 0.5 * h[i]), (i + 1, 0.5 * h[i])):
                acc += wgt * np.exp(-(t - times[j]) * k4) * np.fft.fft(gvals[j])
        if frozen_last:
            hl = h[-1]
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = np.where(k4 > 0, -np.expm1(-hl * k4) / np.where(k4 > 0, k4, 1.0), hl)
            acc += phi * np.fft.fft(gvals[-2])
        mult = (1j * grid.wavenumbers) ** deriv
        if deriv % 2 == 1 and grid.n % 2 == 0:
            mult[grid.n // 2] = 0.0
        return Field(grid, np.real(np.fft.ifft(mult * acc)), t, f"duhamel{deriv}")

    acc = np.zeros(grid.n)
    for i in range(n_trap):
        for j in (i, i + 1):
            acc += 0.5 * h[i] * semigroup_values(gvals[j], grid, t - times[j])
    if frozen_last:
        hl = h[-1]
        # Simpson in the propagation time with the forcing frozen
        g = gvals[-2]
        acc += hl / 6 * (g + 4 * semigroup_values(g, grid, hl / 2) + semigroup_values(g, grid, hl))
    return Field(grid, derivative_values(acc, grid, deriv, "central"), t, f"duhamel{deriv}")
