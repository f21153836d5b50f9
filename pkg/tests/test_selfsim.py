from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import FSIGMA10_MINUS1, FSIGMA10_PLUS1, PHI_LIN0_EPS01
from sdflow.flow import exponential_model, linear_model
from sdflow.grid import GridError, build_grid
from sdflow.selfsim import (Profile, RampSpec, extract_profile, linear_profile, ramp_initial,
                            rescale_solution, run_ramp, scaled_model, smoothstep)
from sdflow.solver import SolverConfig, reconstruct_u


def test_smoothstep_properties():
    z = np.linspace(-1.5, 1.5, 301)
    s = smoothstep(z)
    assert s[0] == 0 and s[-1] == 1 and np.all(np.diff(s) >= 0)
    assert smoothstep(0.0) == pytest.approx(0.5)


def test_ramp_height_is_antiderivative_and_compactly_perturbed():
    r = RampSpec(0.1, -0.05, 0.7)
    x = np.linspace(-3, 3, 6001)
    h = r.height(x)
    assert np.max(np.abs(np.gradient(h, x) - r.slope(x))[1:-1]) < 1e-6
    assert np.max(np.abs(h - r.exact(x))[np.abs(x) >= 0.7]) < 1e-15
    with pytest.raises(ValueError):
        RampSpec(0.5, 0.0)


@pytest.mark.parametrize("kind", ["periodic", "truncated"])
def test_ramp_initial_reconstructs_height(kind):
    r = RampSpec(0.1, 0.05, 1.0)
    g = build_grid(kind, 32.0, 1024)
    v0, anchor = ramp_initial(r, g)
    u = reconstruct_u(v0, anchor)
    inner = np.abs(g.x) < 16
    assert np.max(np.abs(u.values - r.height(g.x))[inner]) < 1e-6


def test_linear_profile_oracle_and_symmetry():
    p = linear_profile(RampSpec(0.1, -0.1), [-1.0, 0.0, 1.0, 20.0])
    assert abs(p.values[1] - PHI_LIN0_EPS01) < 1e-12
    assert abs(p.values[0] - p.values[2]) < 1e-13
    # far from the origin the profile approaches the ramp
    assert abs(p.values[3] - 2.0) < 1e-6


def test_smoothed_linear_profile_forgets_smoothing():
    r = RampSpec(0.1, -0.1, 0.5)
    a = linear_profile(r, [0.0, 1.0], t=1e4, smoothed=True)
    b = linear_profile(r, [0.0, 1.0])
    assert np.max(np.abs(a.values - b.values)) < 1e-3 * 0.1


def test_profile_solution_scaling():
    ys = np.linspace(-3, 3, 61)
    p = Profile(ys, 0.2 * ys, 1.0)
    assert p.solution(np.array([1.0]), 16.0)[0] == pytest.approx(0.2)
    assert p.solution(np.array([1.0]), 16.0, 1)[0] == pytest.approx(0.2)
    with pytest.raises(ValueError):
        p(5.0)


def test_scaled_model_values():
    m = scaled_model(exponential_model(), 10.0)
    assert float(m.f(np.array(-1.0))) + 1 == pytest.approx(FSIGMA10_MINUS1, abs=1e-15)
    assert float(m.f(np.array(1.0))) - 1 == pytest.approx(FSIGMA10_PLUS1, abs=1e-15)
    assert m.kappa_limit == 500.0
    with pytest.raises(ValueError):
        scaled_model(m, 0.0)


def test_equal_slopes_give_linear_profile():
    r = RampSpec(0.1, 0.1, 1.0)
    g = build_grid("truncated", 20.0, 256)
    cfg = SolverConfig(scheme="semi_implicit_fd", t_end=4.0, dt_policy="geometric", snapshot_times=[4.0])
    run = run_ramp(r, linear_model(), g, cfg)
    ys = np.linspace(-2, 2, 41)
    prof = extract_profile(run.trajectory, 4.0, ys)
    assert np.max(np.abs(prof.values - 0.1 * ys)) < 1e-10


def test_rescale_identity_and_domain_guard():
    r = RampSpec(0.1, -0.1, 1.0)
    g = build_grid("periodic", 32.0, 512)
    cfg = SolverConfig(t_end=16.0, dt_policy="geometric", snapshot_times=[0.5, 1.0, 8.0, 16.0])
    run = run_ramp(r, exponential_model(), g, cfg)
    xs = np.linspace(-1, 1, 5)
    w1 = rescale_solution(run.trajectory, 1.0, xs, [1.0])
    assert w1.values.shape == (1, 5)
    w2 = rescale_solution(run.trajectory, 2.0, xs, [1.0], deriv=1)
    assert np.all(np.abs(w2.values) <= 0.1 + 1e-9)
    with pytest.raises(GridError):
        rescale_solution(run.trajectory, 40.0, xs, [0.001])
    with pytest.raises(ValueError):
        rescale_solution(run.trajectory, 0.5, xs, [1.0])
