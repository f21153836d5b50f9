from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdflow.grid import (Field, GridError, NonFiniteFieldError, Trajectory, WindowError, build_grid,
                         derivative_values, fornberg_weights, interpolate, window)


def test_grid_geometry():
    g = build_grid("periodic", 2.0, 16)
    assert g.dx == pytest.approx(0.25)
    assert g.x[0] == -2.0 and g.x[-1] == pytest.approx(1.75)
    assert g.ghost_cells == 0
    assert build_grid("truncated", 2.0, 16).ghost_cells == 2


@pytest.mark.parametrize("kw", [dict(half_length=0, n=16), dict(half_length=1, n=4), dict(half_length=1, n=16.5)])
def test_grid_rejects_bad_input(kw):
    with pytest.raises(GridError):
        build_grid("periodic", **kw)


def test_field_rejects_nonfinite_and_is_readonly():
    g = build_grid("periodic", 1.0, 8)
    with pytest.raises(NonFiniteFieldError):
        Field(g, [np.nan] + [0.0] * 7)
    f = Field(g, np.zeros(8))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_fornberg_second_derivative_weights():
    w = fornberg_weights(0.0, [-1, 0, 1], 2)
    assert np.allclose(w, [1, -2, 1])


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_spectral_derivative_of_sine(order):
    g = build_grid("periodic", np.pi, 32)
    d = derivative_values(np.sin(3 * g.x), g, order)
    exact = 3.0**order * np.sin(3 * g.x + order * np.pi / 2)
    assert np.max(np.abs(d - exact)) < 1e-10


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_central_derivative_converges(order):
    errs = []
    for n in (64, 128):
        g = build_grid("truncated", 1.0, n)
        d = derivative_values(np.exp(g.x), g, order)
        errs.append(np.max(np.abs(d - np.exp(g.x))))
    assert np.log2(errs[0] / errs[1]) > 2.5


def test_interpolation_periodic_and_truncated():
    g = build_grid("periodic", np.pi, 32)
    xs = np.linspace(-3, 3, 17)
    assert np.max(np.abs(interpolate(Field(g, np.cos(2 * g.x)), xs) - np.cos(2 * xs))) < 1e-12
    t = build_grid("truncated", 1.0, 200)
    f = Field(t, t.x**3)
    assert np.max(np.abs(interpolate(f, [0.1, 0.5]) - np.array([0.1, 0.5]) ** 3)) < 1e-6
    with pytest.raises(GridError):
        interpolate(f, [2.0])


def test_dyadic_retention_keeps_records_aligned():
    g = build_grid("periodic", 1.0, 8)
    tr = Trajectory(retention="dyadic", per_octave=2)
    for j in range(-8, 9):
        t = 2.0 ** (j / 4)
        tr.append(Field(g, np.zeros(8), t), {"t": t})
    assert [r["t"] for r in tr.records] == list(tr.times)
    assert np.all(np.diff(tr.times) > 0)
    # last octave kept in full
    assert sum(1 for t in tr.times if t > tr.times[-1] / 2) == 4


def test_trajectory_rejects_nonincreasing_time():
    g = build_grid("periodic", 1.0, 8)
    tr = Trajectory()
    tr.append(Field(g, np.zeros(8), 1.0))
    with pytest.raises(ValueError):
        tr.append(Field(g, np.zeros(8), 1.0))


def test_window_requires_two_snapshots():
    g = build_grid("periodic", 1.0, 8)
    snaps = [Field(g, np.zeros(8), t) for t in (0.5, 0.9, 1.0)]
    assert len(window(snaps, 1.0)) == 2
    with pytest.raises(WindowError):
        window(snaps, 0.6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 5))
def test_spectral_derivative_is_linear_and_kills_constants(c, k):
    g = build_grid("periodic", np.pi, 32)
    vals = c + np.sin(k * g.x)
    d = derivative_values(vals, g, 2)
    assert np.max(np.abs(d + k * k * np.sin(k * g.x))) < 1e-9 * (1 + k * k)
