from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sdflow.flow import (BlowUpError, alpha, alpha_values, check_smallness, coeff_A, coeff_B,
                         curvature, custom_model, exponential_model, f_pert, flux_values,
                         fpert_values, kappa_values, linear_model, model_from_config, rhs_u,
                         rhs_u_expanded, rhs_v)
from sdflow.grid import Field, build_grid, derivative_values

MODELS = [linear_model(), exponential_model()]


def _sympy_rhs(fname):
    x = sp.symbols("x")
    u = sp.Function("u")(x)
    ux = sp.diff(u, x)
    kappa = sp.diff(u, x, 2) / (1 + ux**2) ** sp.Rational(3, 2)
    f = (lambda r: r) if fname == "linear" else (lambda r: sp.exp(r) - 1)
    return x, u, sp.diff(sp.diff(f(-kappa), x) / sp.sqrt(1 + ux**2), x)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_expanded_coefficients_match_symbolic_rhs(model):
    x, u, rhs = _sympy_rhs(model.name)
    q, r, s, p = sp.symbols("q r s p")
    subs = {sp.diff(u, x, 4): p, sp.diff(u, x, 3): s, sp.diff(u, x, 2): r, sp.diff(u, x): q}
    expr = rhs.subs(subs)
    fn = sp.lambdify((q, r, s, p), expr, "numpy")
    rng = np.random.default_rng(1)
    Q, R, S, P = (rng.uniform(-0.4, 0.4, 50) for _ in range(4))
    ours = -coeff_A(Q, R, model) * P + coeff_B(Q, R, S, model)
    assert np.max(np.abs(ours - fn(Q, R, S, P))) < 1e-14


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_flux_matches_symbolic(model):
    v, vx, vxx = sp.symbols("v vx vxx")
    kappa = vx / (1 + v**2) ** sp.Rational(3, 2)
    dkappa = sp.diff(kappa, v) * vx + sp.diff(kappa, vx) * vxx
    fp = 1 if model.name == "linear" else sp.exp(-kappa)
    G = fp * (-dkappa) / sp.sqrt(1 + v**2)
    fn = sp.lambdify((v, vx, vxx), G, "numpy")
    rng = np.random.default_rng(2)
    a, b, c = (rng.uniform(-0.3, 0.3, 40) for _ in range(3))
    assert np.max(np.abs(flux_values(a, b, c, model) - fn(a, b, c))) < 1e-15


def test_fpert_is_three_v_kappa_squared_fprime(rng):
    m = exponential_model()
    v, vx = rng.uniform(-0.3, 0.3, (2, 500))
    k = kappa_values(v, vx)
    assert np.max(np.abs(fpert_values(v, vx, m) - 3 * v * k * k * np.exp(-k))) < 1e-16


def test_alpha_small_slope_limit():
    m = linear_model()
    v = np.array([0.0, 0.1, -0.2])
    assert np.allclose(alpha_values(v, np.zeros(3), m), 1 - (1 + v * v) ** -2)
    e = exponential_model()
    assert abs(alpha_values(np.array([0.0]), np.array([0.01]), e)[0] - (1 - math.exp(-0.01))) < 1e-15


def test_field_wrappers_check_grids():
    g = build_grid("periodic", 2.0, 16)
    h = build_grid("periodic", 3.0, 16)
    v = Field(g, 0.1 * np.sin(g.x), label="v")
    assert curvature(v, v).label == "kappa"
    assert alpha(v, v, linear_model()).grid == g
    assert f_pert(v, v, linear_model()).label == "F"
    with pytest.raises(ValueError):
        curvature(v, Field(h, np.zeros(16)))


def test_models_normalised_and_custom():
    for m in MODELS:
        assert m.f(np.array(0.0)) == 0 and m.fp(np.array(0.0)) == 1
    r = np.linspace(-2, 2, 21)
    c = custom_model(r, np.exp(r))
    xs = np.linspace(-1, 1, 11)
    assert np.max(np.abs(c.fp(xs) - np.exp(xs))) < 1e-3
    assert abs(float(c.f(np.array(0.0)))) < 1e-15
    assert model_from_config({"name": "custom", "r": r.tolist(), "fprime": np.exp(r).tolist()}).name == "custom"
    with pytest.raises(ValueError):
        custom_model([1, 2, 3], [1, 1, 1])
    with pytest.raises(ValueError):
        model_from_config("cubic")


def test_exponential_guard_raises_blowup():
    with pytest.raises(BlowUpError):
        fpert_values(np.array([0.0]), np.array([100.0]), exponential_model())


def test_smallness_report_never_raises():
    g = build_grid("periodic", 2.0, 16)
    v = Field(g, np.full(16, 0.05))
    vx = Field(g, np.full(16, 500.0))
    rep = check_smallness(v, vx, model=exponential_model())
    assert rep.sup_alpha == math.inf and not rep.ok


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_periodic_rhs_conserves_mass(model):
    g = build_grid("periodic", 10.0, 256)
    u = Field(g, 0.1 * np.exp(-g.x**2))
    assert abs(np.mean(rhs_u(u, model).values)) < 1e-14
    v = Field(g, derivative_values(u.values, g, 1), label="v")
    assert abs(np.mean(rhs_v(v, model).values)) < 1e-14


def test_rhs_forms_agree_spectrally():
    g = build_grid("periodic", math.pi, 128)
    u = Field(g, 0.1 * np.sin(g.x) + 0.03 * np.cos(2 * g.x))
    m = exponential_model()
    assert np.max(np.abs(rhs_u(u, m).values - rhs_u_expanded(u, m).values)) < 1e-9
    # v_t is the x-derivative of u_t
    v = Field(g, derivative_values(u.values, g, 1), label="v")
    assert np.max(np.abs(rhs_v(v, m).values - derivative_values(rhs_u(u, m).values, g, 1))) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_flux_decomposition(v, vx, vxx):
    m = exponential_model()
    a = alpha_values(np.array([v]), np.array([vx]), m)
    F = fpert_values(np.array([v]), np.array([vx]), m)
    G = flux_values(np.array([v]), np.array([vx]), np.array([vxx]), m)
    assert abs(G[0] - (-(1 - a[0]) * vxx + F[0])) < 1e-15
