from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdflow.grid import Field, Trajectory, WindowError, build_grid
from sdflow.norms import (HolderSpec, decay_fit, holder_seminorm_space, holder_seminorm_time, scaled_norm,
                          z_norm)


def test_holder_spec_terms():
    s = HolderSpec(2.5)
    assert s.floor == 2 and s.frac == pytest.approx(0.5)
    assert s.sup_terms() == [(0, 0), (1, 0), (2, 0)]
    assert s.space_terms() == [(2, 0)]
    assert [(l, m) for l, m, _ in s.time_terms()] == [(0, 0), (1, 0), (2, 0)]
    assert s.time_terms()[0][2] == pytest.approx(0.625)
    assert HolderSpec(4.5).sup_terms()[-1] == (0, 1)
    with pytest.raises(ValueError):
        HolderSpec(-1)


def test_space_seminorm_of_linear_and_sqrt():
    g = build_grid("truncated", 1.0, 64)
    assert holder_seminorm_space(Field(g, 2.5 * g.x), 1.0) == pytest.approx(2.5)
    # |x|^(1/2) has unit 1/2-seminorm (attained at pairs through 0)
    h = build_grid("truncated", 1.0, 200)
    val = holder_seminorm_space(Field(h, np.sqrt(np.abs(h.x))), 0.5)
    assert 0.99 < val <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        holder_seminorm_space(Field(g, g.x), 1.5)


def test_periodic_seminorm_uses_short_separations():
    g = build_grid("periodic", np.pi, 256)
    val = holder_seminorm_space(Field(g, np.sin(g.x)), 1.0)
    assert val == pytest.approx(1.0, abs=1e-3)


def test_time_seminorm():
    g = build_grid("periodic", 1.0, 8)
    snaps = [Field(g, np.full(8, t**0.5), t) for t in (0.25, 1.0)]
    assert holder_seminorm_time(snaps, 0.5) == pytest.approx(0.5 / 0.75**0.5)
    with pytest.raises(WindowError):
        holder_seminorm_time(snaps[:1], 0.5)


def _power_law_traj(p, times):
    g = build_grid("periodic", np.pi, 64)
    return Trajectory([Field(g, t**p * np.sin(g.x), t) for t in times])


def test_scaled_norm_is_scale_invariant_for_self_similar_data():
    # h^(l/4) sup |d^l v| with v = t^(-1/4) sin(x): sup terms scale like t^(-1/4) h^(l/4)
    tr = _power_law_traj(-0.25, np.geomspace(0.5, 64, 64))
    r1 = scaled_norm(tr, 2.0, 0.5)
    assert set(r1.breakdown) >= {"sup[l=0,m=0]", "x[l=0,m=0,exp=0.5]", "t[l=0,m=0,exp=0.125]"}
    assert r1.total > 0


def test_z_norm_reports_maximiser_and_needs_windows():
    tr = _power_law_traj(-0.5, np.geomspace(0.25, 8, 40))
    rep = z_norm(tr, 2, 0.5)
    assert rep.t_star is not None and rep.window == (rep.t_star / 2, rep.t_star)
    with pytest.raises(WindowError):
        z_norm(_power_law_traj(-0.5, [1.0]), 2, 0.5)
    with pytest.raises(ValueError):
        z_norm(tr, 2, 1.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2.0, -0.05), st.floats(0.1, 10.0))
def test_decay_fit_recovers_power(p, c):
    ts = np.geomspace(1, 100, 12)
    fit = decay_fit(list(zip(ts, c * ts**p)), (1.0, 100.0))
    assert abs(fit.slope - p) < 1e-10 and fit.residual < 1e-10 and fit.points == 12


def test_decay_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        decay_fit([(1.0, 1.0)] * 3, (0.5, 2.0))
    with pytest.raises(ValueError):
        decay_fit([(t, -1.0) for t in range(1, 9)], (1.0, 8.0))
