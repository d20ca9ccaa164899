import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from hiddensplit import (LEFT, RIGHT, Delta, IntervalSpec, RatchetParams, ResetParams, RnTParams, Uniform,
                         decoupled_joint, decoupled_table, ou_eigensystem, pin, ratchet_joint,
                         ripening_eigensystem, rnt_joint)
from hiddensplit.errors import MaxStepsExceeded
from hiddensplit.mc import (EstimateTable, SimConfig, block_rng, robin_boundary_step, simulate_ou,
                            simulate_ratchet, simulate_resetting, simulate_ripening, simulate_rnt)
from hiddensplit.spectral import robin_S


def z_ok(est, expected, limit=4.0):
    z = [est.z_score(s, o, v) for (s, o), v in expected.items()]
    assert max(abs(v) for v in z) < limit, z


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(n_trials=0)


def test_block_streams_differ():
    a = block_rng(7, 0).random(4)
    b = block_rng(7, 1).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, block_rng(7, 0).random(4))


def test_reproducible_across_thread_counts():
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    runs = [simulate_rnt(p, 0.1, 1, SimConfig(dt=1e-3, n_trials=3500, seed=11, threads=t)) for t in (1, 2, 4)]
    assert runs[0].counts == runs[1].counts == runs[2].counts
    other = simulate_rnt(p, 0.1, 1, SimConfig(dt=1e-3, n_trials=3500, seed=12, threads=1))
    assert other.counts != runs[0].counts


def test_ripening_absorbing():
    iv = IntervalSpec(1.0)
    es = ripening_eigensystem(1.0, 10.0)
    est = simulate_ripening(1.0, 10.0, 0.3, iv, 0.1, "U", SimConfig(dt=1e-4, n_trials=20000, seed=1))
    assert est.timeouts == 0
    z_ok(est, {(s, o): decoupled_joint(es, 0.3, iv, 0.1, "U", s, o) for s in (LEFT, RIGHT) for o in "URS"})


def test_ripening_robin():
    iv = IntervalSpec(1.0, 3.0, 10.0)
    es = ripening_eigensystem(1.0, 10.0)
    est = simulate_ripening(1.0, 10.0, 0.3, iv, 0.1, "U", SimConfig(dt=1e-4, n_trials=20000, seed=2))
    z_ok(est, {(s, o): decoupled_joint(es, 0.3, iv, 0.1, "U", s, o) for s in (LEFT, RIGHT) for o in "URS"})


@pytest.mark.slow
def test_robin_bias_shrinks_with_dt():
    # absorption probability per overshoot is first order in sqrt(dt); halving dt twice must reduce the error
    iv = IntervalSpec(1.0, 2.0, 2.0)
    exact = robin_S(iv, 0.2)[0]
    err = []
    for dt in (6.4e-3, 1.6e-3, 4e-4):
        est = simulate_ou(1.0, 1.0, 1.0, iv, 0.2, 0.0, SimConfig(dt=dt, n_trials=40000, seed=5))
        err.append(abs(est.marginal(LEFT) - exact))
    se = math.sqrt(exact * (1 - exact) / 40000)
    assert err[-1] < 3 * se
    assert err[0] > err[-1]


def test_rnt():
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    est = simulate_rnt(p, -0.2, -1, SimConfig(dt=1e-4, n_trials=20000, seed=3))
    z_ok(est, {(s, o): float(rnt_joint(p, -0.2, -1, s, o)) for s in (LEFT, RIGHT) for o in (-1, 1)})


def test_rnt_exact_clock():
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    est = simulate_rnt(p, 0.0, 1, SimConfig(dt=1e-4, n_trials=20000, seed=4, exact_clock=True))
    z_ok(est, {(s, o): float(rnt_joint(p, 0.0, 1, s, o)) for s in (LEFT, RIGHT) for o in (-1, 1)})


@pytest.mark.parametrize("h,a", [(2.0, 1.0), (-2.0, 0.0)])
def test_ratchet(h, a):
    p = RatchetParams(h, a, 1.0, 1.0, 4.0)
    est = simulate_ratchet(p, 0.0, 1, SimConfig(dt=2e-4, n_trials=8000, seed=6))
    z_ok(est, {(s, o): ratchet_joint(None, p, 0.0, 1, s, o) for s in (LEFT, RIGHT) for o in (1, 0)})


def test_resetting_and_pin_ratio():
    p = ResetParams(1.0, 2.0, 1.0, Delta(0.2))
    est = simulate_resetting(p, 0.0, SimConfig(dt=1e-4, n_trials=20000, seed=7), n_max=6)
    z_ok(est, {(s, n): pin(p, 0.0, s, n) for s in (LEFT, RIGHT) for n in range(5)})
    # successive reset counts decay by the analytic ratio
    c = np.array([est.counts[(LEFT, n)] + est.counts[(RIGHT, n)] for n in range(1, 4)], float)
    ratio = c[1:].sum() / c[:-1].sum()
    assert ratio == pytest.approx(p.q, abs=4 * math.sqrt(ratio * (1 - ratio) / c[:-1].sum()))


def test_resetting_uniform_law():
    p = ResetParams(1.0, 3.0, 1.0, Uniform(-0.3, 0.1))
    est = simulate_resetting(p, 0.1, SimConfig(dt=1e-4, n_trials=20000, seed=8), n_max=6)
    z_ok(est, {(s, n): pin(p, 0.1, s, n) for s in (LEFT, RIGHT) for n in range(4)})


def test_ou_exit_distribution():
    iv = IntervalSpec(2.0)
    es = ou_eigensystem(1.0, 1.0)
    est = simulate_ou(1.0, 1.0, 1.0, iv, 0.0, 1.0, SimConfig(dt=1e-4, n_trials=20000, seed=9))
    t = decoupled_table(es, 1.0, iv, 0.0, 1.0)
    grid = t.grid
    edges = np.linspace(-3, 3, 13)
    y = est.samples["y_exit"]
    tv = 0.0
    for side in (LEFT, RIGHT):
        dens = np.array([t.entries[(side, i)] for i in range(len(grid))])
        mask = est.samples["side"] == int(side)
        emp = np.histogram(y[mask], edges)[0] / est.n_trials
        ana = np.diff(np.interp(edges, grid, cumulative_trapezoid(dens, grid, initial=0.0)))
        tv += 0.5 * np.abs(emp - ana).sum()
    assert tv < 0.03


def test_robin_boundary_step():
    g = np.random.default_rng(0)
    assert robin_boundary_step(0.0, 1.0, 1e-4, g) is False
    assert robin_boundary_step(math.inf, 1.0, 1e-4, g) is True
    assert robin_boundary_step(1e6, 1.0, 1e-4, g) is True
    prob = 2.0 * math.sqrt(math.pi * 1e-4)
    hits = sum(robin_boundary_step(2.0, 1.0, 1e-4, g) for _ in range(20000))
    assert hits / 20000 == pytest.approx(prob, abs=4 * math.sqrt(prob / 20000))


def test_reflecting_side_never_exits():
    iv = IntervalSpec(1.0, math.inf, 0.0)
    est = simulate_ripening(1.0, 10.0, 0.3, iv, 0.3, "U", SimConfig(dt=1e-3, n_trials=2000, seed=1))
    assert est.marginal(RIGHT) == 0.0
    assert est.marginal(LEFT) == 1.0


def test_max_steps():
    p = RnTParams(1.0, 2.0, 0.1, 1.0)
    cfg = SimConfig(dt=1e-4, n_trials=100, seed=0, max_steps=5)
    est = simulate_rnt(p, 0.0, 1, cfg)
    assert est.timeouts == 100
    with pytest.raises(MaxStepsExceeded):
        simulate_rnt(p, 0.0, 1, cfg, strict=True)


def test_estimate_table_output():
    t = EstimateTable({(LEFT, 1): 30, (RIGHT, 1): 70}, 100, meta={"model": "x"})
    assert t.p_hat("left", 1) == 0.3
    assert t.std_err(LEFT, 1) == pytest.approx(math.sqrt(0.21 / 100))
    assert t.z_score(LEFT, 0, 0.0) == 0.0
    csv = t.to_csv()
    assert "side,outcome,count,p_hat,std_err" in csv and "# model=x" in csv
    assert '"n_trials": 100' in t.to_json()
