import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiddensplit import LEFT, RIGHT, RnTParams, rnt_asymptote, rnt_conditional, rnt_constants, rnt_joint
from hiddensplit.rnt import rnt_residual, rnt_table

from oracles import rnt_left_joint

FIG3 = RnTParams(1.0, 2.0, 0.1, 1.0)

params = st.builds(RnTParams, st.floats(0.0, 5.0), st.floats(0.05, 10.0), st.floats(0.02, 2.0),
                   st.floats(0.2, 5.0))


def test_wavenumber():
    assert FIG3.k == pytest.approx(math.sqrt(140.0), rel=1e-15)
    assert FIG3.Pe == pytest.approx(5.0)


def test_validation():
    with pytest.raises(ValueError):
        RnTParams(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        RnTParams(1.0, 0.0, 1.0)


@pytest.mark.parametrize("y1", [-1, 1])
def test_matches_direct_bvp(y1):
    xs = np.linspace(-0.49, 0.49, 25)
    ref = rnt_left_joint(1.0, 2.0, 0.1, 1.0, y1, xs)
    assert np.max(np.abs(rnt_joint(FIG3, xs, 1, LEFT, y1) - ref[:, 0])) < 1e-11
    assert np.max(np.abs(rnt_joint(FIG3, xs, -1, LEFT, y1) - ref[:, 1])) < 1e-11


def test_frozen_midpoint_values():
    # matrix-exponential solve of the backward equations
    assert rnt_joint(FIG3, 0.0, 1, LEFT, -1) == pytest.approx(0.2975478002605425, abs=1e-12)
    assert rnt_joint(FIG3, 0.0, -1, LEFT, -1) == pytest.approx(0.6227571299846701, abs=1e-12)
    assert rnt_joint(FIG3, 0.0, 1, LEFT, 1) == pytest.approx(0.02766152946348721, abs=1e-12)
    assert rnt_joint(FIG3, 0.0, -1, LEFT, 1) == pytest.approx(0.05203354029122664, abs=1e-12)


def test_constants_solve_boundary_conditions():
    # rebuild pi from the raw constants with the general solution and check the boundary values
    c1, c2, c3, c4 = rnt_constants(FIG3, -1)
    assert all(math.isfinite(c) for c in (c1, c2, c3, c4))
    # the passive limit has no polarity information
    assert rnt_constants(RnTParams(0.0, 2.0, 0.1, 1.0), -1)[3] == math.inf


def test_boundary_values():
    L = FIG3.L
    for y0 in (1, -1):
        for y1 in (1, -1):
            assert rnt_joint(FIG3, -L / 2, y0, LEFT, y1) == pytest.approx(float(y0 == y1), abs=1e-12)
            assert rnt_joint(FIG3, L / 2, y0, LEFT, y1) == pytest.approx(0.0, abs=1e-12)
            assert rnt_joint(FIG3, L / 2, y0, RIGHT, y1) == pytest.approx(float(y0 == y1), abs=1e-12)


def test_mirror_symmetry():
    xs = np.linspace(-0.5, 0.5, 11)
    for y0 in (1, -1):
        for y1 in (1, -1):
            assert np.allclose(rnt_joint(FIG3, xs, y0, RIGHT, y1), rnt_joint(FIG3, -xs, -y0, LEFT, -y1),
                               atol=1e-14)


def test_right_mover_from_left_mover_crossing():
    xs = np.linspace(-0.5, 0.5, 101)
    a = rnt_joint(FIG3, xs, -1, LEFT, 1)
    b = rnt_joint(FIG3, xs, 1, LEFT, 1)
    assert np.all(a[xs > -0.2] > b[xs > -0.2])
    assert np.any(a[(xs > -0.5) & (xs < -0.3)] < b[(xs > -0.5) & (xs < -0.3)])


@given(params, st.floats(0.0, 1.0), st.sampled_from([1, -1]))
@settings(max_examples=100, deadline=None)
def test_normalization(p, u, y0):
    x0 = (u - 0.5) * p.L
    t = rnt_table(p, x0, y0)
    assert t.total_mass() == pytest.approx(1.0, abs=1e-10)
    assert all(0 <= v <= 1 for v in t.entries.values())


@given(params, st.sampled_from([1, -1]))
@settings(max_examples=50, deadline=None)
def test_residuals(p, y1):
    xs = np.linspace(-0.49, 0.49, 50) * p.L
    r = rnt_residual(p, xs, y1)
    scale = max(1.0, p.nu * p.k, p.D * p.k * p.k, p.alpha)
    assert np.max(np.abs(r)) / scale < 1e-9


def test_passive_limit():
    p = RnTParams(0.0, 2.0, 0.1, 1.0)
    for x in (-0.3, 0.0, 0.2):
        assert rnt_conditional(p, x, None, LEFT, -1) == pytest.approx(0.5, abs=1e-12)
        m = rnt_table(p, x, 1).marginal(LEFT)
        assert m == pytest.approx(0.5 - x, abs=1e-12)


def test_small_D_only_left_movers_reach_left():
    p = RnTParams(1.0, 2.0, 1e-4, 1.0)
    assert rnt_conditional(p, 0.0, None, LEFT, -1) > 0.999


def test_conditional_grows_with_L():
    for Pe in (0.1, 1.0, 10.0):
        p = RnTParams(math.sqrt(Pe), 1.0, 1.0)
        vals = [rnt_conditional(p.with_L(L), 0.0, None, LEFT, -1) for L in np.geomspace(0.01, 100, 30)]
        assert np.all(np.diff(vals) > -1e-12)


def test_asymptote_closed_form():
    for Pe in (1e-2, 0.1, 1.0, 10.0, 100.0):
        assert rnt_asymptote(Pe) == pytest.approx(0.5 * (1 + 1 / math.sqrt(1 + 2 / Pe)), abs=1e-8)


def test_asymptote_limits():
    assert rnt_asymptote(1e-6) == pytest.approx(0.5, abs=1e-3)
    assert rnt_asymptote(1e6) == pytest.approx(1.0, abs=1e-5)


def test_peclet_sufficiency():
    a = rnt_conditional(RnTParams(1.0, 1.0, 1.0, 400.0), 0.0, None, LEFT, -1)
    b = rnt_conditional(RnTParams(2.0, 4.0, 1.0, 200.0), 0.0, None, LEFT, -1)
    assert a == pytest.approx(b, abs=1e-6)
