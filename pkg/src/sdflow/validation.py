"""Fast invariant checks used by ``sdflow validate``."""
from __future__ import annotations

import math

import numpy as np

from .flow import (alpha_values, coeff_A, exponential_model, fpert_values, linear_model, rhs_u,
                   rhs_v)
from .grid import Field, build_grid, derivative_values
from .norms import decay_fit, holder_seminorm_space
from .selfsim import scaled_model
from .semigroup import KernelTable, kernel_quadrature, semigroup_values
from .solver import picard_local, step_if_imex


def _check(name: str, value: float, tolerance: float) -> dict:
    value = float(value)
    return {"name": name, "value": value, "tolerance": tolerance,
            "passed": bool(math.isfinite(value) and value <= tolerance)}


def _gaussian(grid, s=1.0, amp=1.0) -> np.ndarray:
    return amp * np.exp(-grid.x**2 / (2 * s * s))


def run_checks(seed: int = 20240601, kernel_range: float = 16.0) -> list[dict]:
    rng = np.random.default_rng(seed)
    out: list[dict] = []
    quad = kernel_quadrature()

    # kernel
    out.append(_check("kernel_peak", abs(quad.profile(np.array([0.0]))[0] - math.gamma(1.25) / math.pi), 1e-10))
    table = KernelTable.build(kernel_range, 0.01)
    out.append(_check("kernel_symmetry", table.symmetry_defect(), 1e-10))
    out.append(_check("kernel_mass", abs(table.mass() - 1.0), 1e-4))

    # semigroup: multiplier vs convolution, composition, eigenmode
    per = build_grid("periodic", 40.0, 2048)
    tru = build_grid("truncated", 40.0, 2048)
    g = _gaussian(per)
    err = max(float(np.max(np.abs(semigroup_values(g, per, t) - semigroup_values(g, tru, t))))
              for t in (0.1, 1.0, 4.0))
    out.append(_check("multiplier_vs_convolution", err, 1e-6))
    small = build_grid("periodic", 20.0, 512)
    g = _gaussian(small)
    comp = semigroup_values(semigroup_values(g, small, 0.3), small, 0.7) - semigroup_values(g, small, 1.0)
    out.append(_check("semigroup_composition", np.max(np.abs(comp)), 1e-10))
    pi_grid = build_grid("periodic", math.pi, 64)
    mode = np.sin(2 * pi_grid.x)
    out.append(_check("eigenmode_decay",
                      np.max(np.abs(semigroup_values(mode, pi_grid, 0.1) - math.exp(-1.6) * mode)), 1e-12))

    # nonlinear operators on a random battery
    lin, ex = linear_model(), exponential_model()
    v = rng.uniform(-0.3, 0.3, 200)
    vx = rng.uniform(-0.3, 0.3, 200)
    F = fpert_values(v, vx, ex)
    kappa = vx / (1 + v * v) ** 1.5
    out.append(_check("fpert_identity", np.max(np.abs(F - 3.0 * v * kappa**2 * ex.fp(-kappa))), 1e-14))
    out.append(_check("alpha_linear_zero_slope", np.max(np.abs(alpha_values(np.zeros(5), vx[:5], lin))), 1e-15))
    out.append(_check("coeff_A_at_rest", abs(float(coeff_A(0.0, 0.0, ex)) - 1.0), 1e-15))
    sm = scaled_model(ex, 10.0)
    r = rng.uniform(-1, 1, 50)
    out.append(_check("scaled_model_derivative", np.max(np.abs(sm.fp(r) - np.exp(r / 10.0))), 1e-14))

    # conservation
    grid = build_grid("periodic", 20.0, 256)
    u = Field(grid, 0.05 * np.exp(-grid.x**2), 0.0, "u")
    out.append(_check("rhs_u_mean_zero", abs(np.mean(rhs_u(u, ex).values)), 1e-12))
    vf = Field(grid, derivative_values(u.values, grid, 1), 0.0, "v")
    out.append(_check("rhs_v_mean_zero", abs(np.mean(rhs_v(vf, ex).values)), 1e-12))
    m0 = np.mean(vf.values + 0.01)
    w = vf.replace(values=vf.values + 0.01)
    for _ in range(100):
        w = step_if_imex(w, 1e-3, ex)
    out.append(_check("imex_mass_drift", abs(np.mean(w.values) - m0), 1e-12))

    # Picard contraction for small data
    pg = build_grid("periodic", 8.0, 128)
    v0 = Field(pg, 0.02 * np.exp(-pg.x**2 / 0.5), 0.0, "v")
    rep = picard_local(v0, 0.05, 6, lin, n_times=16)
    out.append(_check("picard_factor", max(rep.factors) if rep.factors else 0.0, 0.5))

    # norm utilities
    ts = np.geomspace(1, 100, 20)
    fit = decay_fit(list(zip(ts, 3.0 * ts**-0.75)), (1.0, 100.0))
    out.append(_check("decay_fit_exact", abs(fit.slope + 0.75), 1e-12))
    lg = build_grid("truncated", 1.0, 64)
    out.append(_check("holder_linear", abs(holder_seminorm_space(Field(lg, 2.5 * lg.x), 1.0) - 2.5), 1e-12))
    return out
