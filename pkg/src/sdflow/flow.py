"""Curvature models and the nonlinear operators of the graph flow.

Sign convention: ``kappa = u_xx / (1 + u_x^2)^(3/2)`` (so convex graphs have
positive kappa) and the equation reads

    u_t = ( (1 + u_x^2)^(-1/2) * ( f(-kappa) )_x )_x .

With ``v = u_x`` this is ``v_t = (G)_xx`` where

    G = (1 + v^2)^(-1/2) (f(-kappa))_x = -(1 - alpha) v_xx + F,
    alpha = 1 - (1 + v^2)^(-2) f'(-kappa),
    F = 3 v v_x^2 f'(-kappa) / (1 + v^2)^3 = 3 v kappa^2 f'(-kappa).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grid import Field, GridSpec, check_same_grid, derivative_values

DEFAULT_EPS0 = 0.1
DEFAULT_DELTA0 = 0.1
EXP_KAPPA_LIMIT = 50.0

Fn = Callable[[np.ndarray], np.ndarray]


class BlowUpError(RuntimeError):
    """The solution left the regime where the model can be evaluated."""

    def __init__(self, message: str, snapshot: Field | None = None):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class CurvatureModel:
    """The response ``f`` with ``f(0) = 0`` and ``f'(0) = 1``.

    ``kappa_limit`` is the largest ``|kappa|`` the model accepts before the
    evaluation is treated as a blow-up (None means unlimited).
    """

    name: str
    f: Fn
    fp: Fn
    fpp: Fn
    kappa_limit: float | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        f0 = float(self.f(np.array(0.0)))
        fp0 = float(self.fp(np.array(0.0)))
        if abs(f0) > 1e-12:
            raise ValueError(f"model {self.name!r}: f(0) = {f0}, expected 0")
        if abs(fp0 - 1.0) > 1e-8:
            raise ValueError(f"model {self.name!r}: f'(0) = {fp0}, expected 1")

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}

    def guard(self, kappa: np.ndarray) -> None:
        if self.kappa_limit is None:
            return
        peak = float(np.max(np.abs(kappa))) if np.size(kappa) else 0.0
        if not peak <= self.kappa_limit:
            raise BlowUpError(f"|kappa| = {peak:.3g} exceeds {self.kappa_limit:g} ({self.name} model)")


def linear_model() -> CurvatureModel:
    return CurvatureModel(
        "linear",
        f=lambda r: np.asarray(r, dtype=float) * 1.0,
        fp=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        fpp=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


def exponential_model() -> CurvatureModel:
    # e^r shifted by a constant; only derivatives of f(-kappa) enter the flow
    return CurvatureModel(
        "exponential",
        f=np.expm1,
        fp=np.exp,
        fpp=np.exp,
        kappa_limit=EXP_KAPPA_LIMIT,
    )


def custom_model(r: Sequence[float], fprime: Sequence[float], name: str = "custom") -> CurvatureModel:
    """Model from tabulated ``(r, f'(r))`` pairs via monotone cubic interpolation.

    ``f`` is the antiderivative of the interpolant normalized to ``f(0) = 0``;
    ``f''`` is the derivative of the interpolant. Outside the table the
    interpolant is extrapolated and probing there is the caller's risk.
    """
    r = np.asarray(r, dtype=float)
    fpv = np.asarray(fprime, dtype=float)
    if r.ndim != 1 or r.shape != fpv.shape or len(r) < 3:
        raise ValueError("need at least three matching (r, f'(r)) pairs")
    if np.any(np.diff(r) <= 0):
        raise ValueError("r values must strictly increase")
    if not r[0] < 0 < r[-1]:
        raise ValueError("table must bracket r = 0")
    if np.any(fpv <= 0):
        raise ValueError("f' must be positive")
    interp = PchipInterpolator(r, fpv, extrapolate=True)
    anti = interp.antiderivative()
    shift = float(anti(0.0))
    deriv = interp.derivative()
    return CurvatureModel(
        name,
        f=lambda x: anti(x) - shift,
        fp=lambda x: interp(x),
        fpp=lambda x: deriv(x),
        params={"r": r.tolist(), "fprime": fpv.tolist()},
    )


def model_from_config(cfg: str | dict) -> CurvatureModel:
    if isinstance(cfg, str):
        cfg = {"name": cfg}
    name = cfg.get("name")
    if name == "linear":
        return linear_model()
    if name == "exponential":
        return exponential_model()
    if name == "custom":
        return custom_model(cfg["r"], cfg["fprime"])
    raise ValueError(f"unknown curvature model {name!r}")


# -- pointwise formulas on arrays --------------------------------------------


def kappa_values(v, vx) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.asarray(vx, dtype=float) / (1.0 + v * v) ** 1.5


def alpha_values(v, vx, model: CurvatureModel) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    kappa = kappa_values(v, vx)
    model.guard(kappa)
    return 1.0 - model.fp(-kappa) / (1.0 + v * v) ** 2


def fpert_values(v, vx, model: CurvatureModel) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vx = np.asarray(vx, dtype=float)
    kappa = kappa_values(v, vx)
    model.guard(kappa)
    return 3.0 * v * vx * vx * model.fp(-kappa) / (1.0 + v * v) ** 3


def flux_values(v, vx, vxx, model: CurvatureModel) -> np.ndarray:
    """``G = (1 + v^2)^(-1/2) (f(-kappa))_x``, so that ``u_t = G_x``."""
    v = np.asarray(v, dtype=float)
    vx = np.asarray(vx, dtype=float)
    kappa = kappa_values(v, vx)
    model.guard(kappa)
    w = 1.0 + v * v
    return model.fp(-kappa) * (3.0 * v * vx * vx / w**3 - np.asarray(vxx, dtype=float) / w**2)


def coeff_A(q, r, model: CurvatureModel):
    """Coefficient of ``-u_xxxx`` in the expanded right side."""
    q = np.asarray(q, dtype=float)
    w = 1.0 + q * q
    kappa = np.asarray(r, dtype=float) / w**1.5
    model.guard(kappa)
    return model.fp(-kappa) / w**2


def coeff_B(q, r, s, model: CurvatureModel):
    """Lower-order remainder of the expanded right side in ``(u_x, u_xx, u_xxx)``."""
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    w = 1.0 + q * q
    kappa = r / w**1.5
    model.guard(kappa)
    first = ((10.0 * q * r * s + 3.0 * r**3) / w**3 - 18.0 * q * q * r**3 / w**4) * model.fp(-kappa)
    kx = s / w**1.5 - 3.0 * q * r * r / w**2.5
    return first + kx * kx / np.sqrt(w) * model.fpp(-kappa)


# -- field-level operators ---------------------------------------------------


def _field_pair(v: Field, vx: Field) -> GridSpec:
    grid = check_same_grid(v, vx)
    if v.time != vx.time:
        raise ValueError("fields are stamped at different times")
    return grid


def curvature(v: Field, vx: Field) -> Field:
    _field_pair(v, vx)
    return v.replace(values=kappa_values(v.values, vx.values), label="kappa")


def alpha(v: Field, vx: Field, model: CurvatureModel) -> Field:
    _field_pair(v, vx)
    return v.replace(values=alpha_values(v.values, vx.values, model), label="alpha")


def f_pert(v: Field, vx: Field, model: CurvatureModel) -> Field:
    _field_pair(v, vx)
    return v.replace(values=fpert_values(v.values, vx.values, model), label="F")


def rhs_u(u: Field, model: CurvatureModel, scheme: str = "auto") -> Field:
    """Divergence-form right side by nested discrete derivatives."""
    grid = u.grid
    d = lambda a: derivative_values(a, grid, 1, scheme)  # noqa: E731
    q = d(u.values)
    kappa = kappa_values(q, d(q))
    model.guard(kappa)
    g = d(model.f(-kappa)) / np.sqrt(1.0 + q * q)
    return u.replace(values=d(g), label="u_t")


def rhs_u_expanded(u: Field, model: CurvatureModel, scheme: str = "auto") -> Field:
    """``-A(u_x, u_xx) u_xxxx + B(u_x, u_xx, u_xxx)``."""
    grid = u.grid
    q, r, s, p = (derivative_values(u.values, grid, k, scheme) for k in (1, 2, 3, 4))
    return u.replace(values=-coeff_A(q, r, model) * p + coeff_B(q, r, s, model), label="u_t")


def rhs_v(v: Field, model: CurvatureModel, scheme: str = "auto") -> Field:
    """``v_t = G_xx`` evaluated from ``v`` directly."""
    grid = v.grid
    vx = derivative_values(v.values, grid, 1, scheme)
    vxx = derivative_values(v.values, grid, 2, scheme)
    g = flux_values(v.values, vx, vxx, model)
    return v.replace(values=derivative_values(g, grid, 2, scheme), label="v_t")


@dataclass(frozen=True)
class SmallnessReport:
    sup_v: float
    sup_vx: float
    sup_alpha: float
    threshold: float
    ok: bool

    def to_dict(self) -> dict:
        return {
            "sup_v": self.sup_v,
            "sup_vx": self.sup_vx,
            "sup_alpha": self.sup_alpha,
            "threshold": self.threshold,
            "ok": self.ok,
        }


def check_smallness(v: Field, vx: Field, eps0: float = DEFAULT_EPS0,
                    model: CurvatureModel | None = None) -> SmallnessReport:
    """Compare slope sizes against ``eps0``; never raises on a large state.

    ``sup_alpha`` uses ``model`` (the linear model if omitted). A model
    evaluation that overflows reports ``inf``.
    """
    _field_pair(v, vx)
    sv, svx = v.sup(), vx.sup()
    try:
        sa = float(np.max(np.abs(alpha_values(v.values, vx.values, model or linear_model()))))
    except BlowUpError:
        sa = math.inf
    return SmallnessReport(sv, svx, sa, float(eps0), bool(max(sv, svx) < eps0))
