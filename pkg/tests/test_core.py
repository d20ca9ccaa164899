import math

import pytest
from hypothesis import given, strategies as st

from hiddensplit import (LEFT, RIGHT, ExitEvent, ExitSide, IntervalSpec, JointSplittingTable, RnTParams,
                         condition_on_exit, condition_with_prior, rnt_conditional)
from hiddensplit.core import check_in_interval
from hiddensplit.errors import MissingTable, NoExitPossible, OutOfDomain, ZeroMarginal
from hiddensplit.rnt import rnt_table


def small_table():
    return JointSplittingTable({(LEFT, -1): 0.3, (LEFT, 1): 0.1, (RIGHT, -1): 0.2, (RIGHT, 1): 0.4}, 0.0, 1)


def test_exit_side_parsing():
    assert ExitSide.parse("left") is LEFT
    assert ExitSide.parse("R") is RIGHT
    assert ExitSide.parse(-1) is LEFT
    assert -LEFT is RIGHT
    with pytest.raises(ValueError):
        ExitSide.parse("up")


def test_interval_validation():
    with pytest.raises(ValueError):
        IntervalSpec(0.0)
    with pytest.raises(ValueError):
        IntervalSpec(1.0, -1.0)
    iv = IntervalSpec(2.0, math.inf, 3.0)
    assert iv.kappa(LEFT) == math.inf and iv.kappa(RIGHT) == 3.0
    assert iv.boundary(LEFT) == -1.0
    with pytest.raises(NoExitPossible):
        IntervalSpec(1.0, 0.0, 0.0).check_exit_possible()


def test_infinite_kappa_is_distinct_from_large():
    assert IntervalSpec(1.0, math.inf).kappa_left != IntervalSpec(1.0, 1e300).kappa_left


def test_position_check():
    check_in_interval(0.5, 1.0)
    with pytest.raises(OutOfDomain):
        check_in_interval(0.6, 1.0)


def test_condition_on_exit_ratio():
    post = condition_on_exit(small_table(), LEFT)
    assert post[-1] == pytest.approx(0.75, abs=1e-15)
    assert post[1] == pytest.approx(0.25, abs=1e-15)
    assert post.conditioning is LEFT


def test_condition_on_blocked_side():
    t = JointSplittingTable({(LEFT, 0): 1.0, (RIGHT, 0): 0.0}, 0.0, 0)
    with pytest.raises(ZeroMarginal):
        condition_on_exit(t, RIGHT)


def test_table_rejects_non_probability():
    with pytest.raises(ValueError):
        JointSplittingTable({(LEFT, 0): 1.5}, 0.0, 0)


def test_delta_prior_matches_single_table():
    t = small_table()
    a = condition_with_prior({1: t}, {1: 1.0}, LEFT)
    b = condition_on_exit(t, LEFT)
    assert a.entries == pytest.approx(b.entries, abs=1e-15)


def test_missing_table():
    with pytest.raises(MissingTable):
        condition_with_prior({1: small_table()}, {1: 0.5, -1: 0.5}, LEFT)


def test_symmetric_prior_rnt_matches_conditional():
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    tables = {y: rnt_table(p, 0.0, y) for y in (1, -1)}
    post = condition_with_prior(tables, {1: 0.5, -1: 0.5}, LEFT)
    assert post[-1] == pytest.approx(rnt_conditional(p, 0.0, None, LEFT, -1), abs=1e-14)
    # numerator/denominator form by hand
    num = tables[1].entries[(LEFT, -1)] + tables[-1].entries[(LEFT, -1)]
    den = tables[1].marginal(LEFT) + tables[-1].marginal(LEFT)
    assert post[-1] == pytest.approx(num / den, abs=1e-14)


def test_exit_event_validation():
    ExitEvent(LEFT, 1, 0, 0.3)
    with pytest.raises(ValueError):
        ExitEvent(LEFT, 1, -1, 0.3)
    with pytest.raises(ValueError):
        ExitEvent(LEFT, 1, 0, 0.0)


weights = st.floats(0.0, 1.0, allow_nan=False)


@given(st.lists(weights, min_size=4, max_size=4).filter(lambda w: w[0] + w[1] > 1e-6 and sum(w) > 0))
def test_posterior_is_normalized(w):
    s = sum(w)
    t = JointSplittingTable({(LEFT, 0): w[0] / s, (LEFT, 1): w[1] / s,
                             (RIGHT, 0): w[2] / s, (RIGHT, 1): w[3] / s}, 0.0, 0)
    post = condition_on_exit(t, LEFT)
    assert post.total() == pytest.approx(1.0, abs=1e-12)
    assert all(v >= 0 for v in post.values())


@given(st.floats(0.01, 0.99), st.floats(-0.49, 0.49))
def test_prior_mixture_is_normalized(w, x0):
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    tables = {y: rnt_table(p, x0, y) for y in (1, -1)}
    post = condition_with_prior(tables, {1: w, -1: 1 - w}, RIGHT)
    assert post.total() == pytest.approx(1.0, abs=1e-12)
