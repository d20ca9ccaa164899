"""
Monte-Carlo exit-event simulator.

Every model is integrated with Euler-Maruyama steps of size ``dt`` until the
observable leaves ``[-L/2, L/2]``.  Trials are grouped in fixed-size blocks;
block ``b`` draws from its own ``PCG64`` stream seeded by
``SeedSequence(seed, spawn_key=(b,))``, so the result is bit-identical for
any number of worker threads.  The kernels are compiled with numba and
release the GIL, so blocks run concurrently in a thread pool.

Exit detection at an absorbing end also uses the Brownian-bridge crossing
probability ``exp(-d0 d1 / (D dt))`` between consecutive positions, which
removes the ``O(sqrt(dt))`` bias of checking only the endpoints.  Passing
``bridge=False`` restores plain endpoint checks.  A finite-permeability end
absorbs an overshooting step with probability ``min(1, kappa sqrt(pi D dt))``
and otherwise mirrors it back inside.

The hidden state reported at exit is the one held during the crossing step.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numba
import numpy as np

from .core import LEFT, RIGHT, ExitSide, IntervalSpec, check_in_interval
from .errors import MaxStepsExceeded

BLOCK = 1000
N_MAX_RESETS = 50

# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Time step.
    n_trials : int
        Number of independent trajectories.
    seed : int
        Root seed; per-block streams are derived from it.
    max_steps : int
        Per-trajectory step limit; trajectories hitting it are counted as
        timeouts.
    bridge : bool
        Brownian-bridge crossing check at absorbing ends.
    exact_clock : bool
        Exponential waiting times for telegraph and reset clocks instead of a
        Bernoulli trial per step.
    threads : int or None
        Worker threads (default: CPU count).
    """

    dt: float = 1e-5
    n_trials: int = 100_000
    seed: int = 0
    max_steps: int = 10 ** 9
    bridge: bool = True
    exact_clock: bool = False
    threads: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class EstimateTable:
    """Exit counts per ``(side, outcome)`` with binomial standard errors."""

    counts: dict
    n_trials: int
    timeouts: int = 0
    meta: dict = field(default_factory=dict)
    samples: dict | None = None

    def p_hat(self, side, outcome) -> float:
        return self.counts.get((ExitSide.parse(side), outcome), 0) / self.n_trials

    def std_err(self, side, outcome) -> float:
        p = self.p_hat(side, outcome)
        return math.sqrt(p * (1 - p) / self.n_trials)

    def marginal(self, side) -> float:
        side = ExitSide.parse(side)
        return sum(c for (s, _), c in self.counts.items() if s == side) / self.n_trials

    def marginal_err(self, side) -> float:
        p = self.marginal(side)
        return math.sqrt(p * (1 - p) / self.n_trials)

    def z_score(self, side, outcome, value) -> float:
        se = self.std_err(side, outcome)
        d = self.p_hat(side, outcome) - value
        if se == 0:
            # no events observed: compare against the resolution 1/N
            return 0.0 if abs(d) < 1.0 / self.n_trials else math.copysign(math.inf, d)
        return d / se

    def rows(self):
        out = []
        for (side, outcome) in sorted(self.counts, key=lambda k: (int(k[0]), str(k[1]))):
            out.append((side.label, outcome, self.counts[(side, outcome)],
                        self.p_hat(side, outcome), self.std_err(side, outcome)))
        return out

    def to_csv(self) -> str:
        lines = [f"# n_trials={self.n_trials}", f"# timeouts={self.timeouts}"]
        lines += [f"# {k}={v}" for k, v in self.meta.items()]
        lines.append("side,outcome,count,p_hat,std_err")
        for side, outcome, c, p, se in self.rows():
            lines.append(f"{side},{outcome},{c},{p:.17g},{se:.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {"n_trials": self.n_trials, "timeouts": self.timeouts, "meta": self.meta,
               "rows": [dict(zip(("side", "outcome", "count", "p_hat", "std_err"), r)) for r in self.rows()]}
        return json.dumps(doc, indent=2, default=str)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@numba.njit(inline="always")
def _boundary(x0, x1, lo, hi, kl, kr, D, dt, bridge, rng):
    """Resolve one step ``x0 -> x1``.  Returns ``(code, x)`` with code -1/+1 on exit."""
    if x1 <= lo:
        if math.isinf(kl):
            return -1, lo
        if kl > 0 and rng.random() < min(1.0, kl * math.sqrt(math.pi * D * dt)):
            return -1, lo
        x1 = 2 * lo - x1
        if x1 >= hi:
            x1 = hi - 1e-15
        return 0, x1
    if x1 >= hi:
        if math.isinf(kr):
            return 1, hi
        if kr > 0 and rng.random() < min(1.0, kr * math.sqrt(math.pi * D * dt)):
            return 1, hi
        x1 = 2 * hi - x1
        if x1 <= lo:
            x1 = lo + 1e-15
        return 0, x1
    if bridge:
        if math.isinf(kl):
            if rng.random() < math.exp(-(x0 - lo) * (x1 - lo) / (D * dt)):
                return -1, lo
        if math.isinf(kr):
            if rng.random() < math.exp(-(hi - x0) * (hi - x1) / (D * dt)):
                return 1, hi
    return 0, x1


@numba.njit(nogil=True)
def _ripening_kernel(rng, n, x0, y0, lo, hi, kl, kr, D, r, s, dt, max_steps, bridge):
    side = np.zeros(n, np.int8)
    out = np.zeros(n, np.float64)
    tau = np.zeros(n, np.float64)
    sq = math.sqrt(2 * D * dt)
    for i in range(n):
        x = x0
        # absolute jump times U->R and R->S from exponential clocks
        t_ur = 0.0 if y0 >= 1 else rng.exponential(1.0 / r)
        t_rs = 0.0 if y0 >= 2 else t_ur + rng.exponential(1.0 / s)
        code = 0
        k = 0
        while k < max_steps:
            t = k * dt
            xn = x + sq * rng.standard_normal()
            code, xn = _boundary(x, xn, lo, hi, kl, kr, D, dt, bridge, rng)
            k += 1
            if code != 0:
                y = 0 if t < t_ur else (1 if t < t_rs else 2)
                out[i] = y
                break
            x = xn
        side[i] = code
        tau[i] = k * dt
    return side, out, tau


@numba.njit(nogil=True)
def _brownian_kernel(rng, n, x0, lo, hi, kl, kr, D, dt, max_steps, bridge):
    side = np.zeros(n, np.int8)
    tau = np.zeros(n, np.float64)
    sq = math.sqrt(2 * D * dt)
    for i in range(n):
        x = x0
        code = 0
        k = 0
        while k < max_steps:
            xn = x + sq * rng.standard_normal()
            code, xn = _boundary(x, xn, lo, hi, kl, kr, D, dt, bridge, rng)
            k += 1
            if code != 0:
                break
            x = xn
        side[i] = code
        tau[i] = k * dt
    return side, tau


@numba.njit(nogil=True)
def _telegraph_kernel(rng, n, x0, y0, lo, hi, D, dt, rate, model, nu, a, fl, fr,
                      max_steps, bridge, exact):
    """Two-state hidden telegraph driving the drift.

    model 0: run-and-tumble, state in {-1, +1}, drift ``nu * y``.
    model 1: flickering ratchet, state in {0, 1}, drift ``y * (fl if x <= a else fr)``.
    """
    side = np.zeros(n, np.int8)
    out = np.zeros(n, np.float64)
    tau = np.zeros(n, np.float64)
    sq = math.sqrt(2 * D * dt)
    p_flip = rate * dt
    inf = math.inf
    for i in range(n):
        x = x0
        y = y0
        t_next = rng.exponential(1.0 / rate) if exact else 0.0
        code = 0
        k = 0
        while k < max_steps:
            if model == 0:
                drift = nu * y
            else:
                drift = y * (fl if x <= a else fr)
            xn = x + drift * dt + sq * rng.standard_normal()
            code, xn = _boundary(x, xn, lo, hi, inf, inf, D, dt, bridge, rng)
            k += 1
            if code != 0:
                out[i] = y
                break
            x = xn
            if exact:
                t = k * dt
                while t_next <= t:
                    y = -y if model == 0 else 1 - y
                    t_next += rng.exponential(1.0 / rate)
            elif rng.random() < p_flip:
                y = -y if model == 0 else 1 - y
        side[i] = code
        tau[i] = k * dt
    return side, out, tau


@numba.njit(nogil=True)
def _reset_kernel(rng, n, x0, lo, hi, D, dt, rate, kind, pts, cdf, ulo, uhi,
                  max_steps, bridge, exact):
    """Resetting Brownian motion.  ``kind``: 0 delta/discrete (pts, cdf), 1 uniform."""
    side = np.zeros(n, np.int8)
    out = np.zeros(n, np.float64)
    tau = np.zeros(n, np.float64)
    sq = math.sqrt(2 * D * dt)
    p_reset = rate * dt
    inf = math.inf
    for i in range(n):
        x = x0
        nres = 0
        t_next = rng.exponential(1.0 / rate) if exact else 0.0
        code = 0
        k = 0
        while k < max_steps:
            k += 1
            if exact:
                fire = t_next <= k * dt
                if fire:
                    t_next = k * dt + rng.exponential(1.0 / rate)
            else:
                fire = rng.random() < p_reset
            if fire:
                if kind == 1:
                    x = ulo + (uhi - ulo) * rng.random()
                else:
                    u = rng.random()
                    j = 0
                    while j < len(cdf) - 1 and u > cdf[j]:
                        j += 1
                    x = pts[j]
                nres += 1
                continue
            xn = x + sq * rng.standard_normal()
            code, xn = _boundary(x, xn, lo, hi, inf, inf, D, dt, bridge, rng)
            if code != 0:
                break
            x = xn
        side[i] = code
        out[i] = nres
        tau[i] = k * dt
    return side, out, tau


# ---------------------------------------------------------------------------
# block scheduling
# ---------------------------------------------------------------------------

def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run_blocks(cfg: SimConfig, fn, block: int = BLOCK):
    """Run ``fn(rng, n) -> (side, outcome, tau)`` over all blocks, in block order."""
    sizes = [block] * (cfg.n_trials // block)
    if cfg.n_trials % block:
        sizes.append(cfg.n_trials % block)
    jobs = list(enumerate(sizes))
    threads = cfg.threads or os.cpu_count() or 1

    def work(job):
        b, n = job
        return fn(block_rng(cfg.seed, b), n)

    if threads == 1 or len(jobs) == 1:
        parts = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, jobs))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))


def _tabulate(side, outcome, tau, cfg: SimConfig, meta, outcomes, keep_samples=False):
    counts = {}
    for s in (LEFT, RIGHT):
        mask = side == int(s)
        for o in outcomes:
            counts[(s, o)] = int(np.count_nonzero(mask & (outcome == o)))
    timeouts = int(np.count_nonzero(side == 0))
    meta = {**meta, **{k: v for k, v in asdict(cfg).items() if k != "threads"}}
    samples = None
    if keep_samples:
        samples = {"side": side, "outcome": outcome, "exit_time": tau}
    return EstimateTable(counts, cfg.n_trials, timeouts, meta, samples)


def _check_timeouts(table: EstimateTable, strict: bool):
    if strict and table.timeouts:
        raise MaxStepsExceeded(f"{table.timeouts} trajectories exceeded max_steps")
    return table


def _ends(iv: IntervalSpec):
    return -iv.half_width, iv.half_width, float(iv.kappa_left), float(iv.kappa_right)


# ---------------------------------------------------------------------------
# public simulators
# ---------------------------------------------------------------------------

RIPENING_STATES = ("U", "R", "S")


def simulate_ripening(r: float, s: float, D: float, iv: IntervalSpec, x0: float, y0,
                      cfg: SimConfig, strict: bool = False, keep_samples: bool = False) -> EstimateTable:
    """Brownian motion with an independent U -> R -> S ripening chain.

    ``y0`` and the outcomes are state labels ``'U'``, ``'R'``, ``'S'``.
    """
    iv.check_exit_possible()
    check_in_interval(x0, iv.L)
    y = RIPENING_STATES.index(y0)
    lo, hi, kl, kr = _ends(iv)
    side, out, tau = _run_blocks(cfg, lambda g, n: _ripening_kernel(
        g, n, float(x0), y, lo, hi, kl, kr, D, r, s, cfg.dt, cfg.max_steps, cfg.bridge))
    labels = np.array(RIPENING_STATES, dtype=object)[out.astype(int)]
    meta = {"model": "ripening", "r": r, "s": s, "D": D, "L": iv.L,
            "kappa_left": iv.kappa_left, "kappa_right": iv.kappa_right, "x0": x0, "y0": y0}
    t = _tabulate(side, labels, tau, cfg, meta, RIPENING_STATES, keep_samples)
    return _check_timeouts(t, strict)


def simulate_ou(mu: float, D_Y: float, D: float, iv: IntervalSpec, x0: float, y0: float,
                cfg: SimConfig, bins=None, strict: bool = False) -> EstimateTable:
    """Brownian motion with an independent Ornstein-Uhlenbeck hidden variable.

    Because ``Y`` never feeds back on ``X``, its value at the exit time ``tau``
    is drawn exactly from ``N(y0 exp(-mu tau), l^2 (1 - exp(-2 mu tau)))``
    after the trajectory of ``X`` is finished, using the same block stream.
    Outcomes are bin indices of ``bins`` (default: 241 points on +-6 l); the
    raw exit values are kept in ``samples``.
    """
    iv.check_exit_possible()
    check_in_interval(x0, iv.L)
    ell = math.sqrt(D_Y / mu)
    lo, hi, kl, kr = _ends(iv)

    def fn(g, n):
        side, tau = _brownian_kernel(g, n, float(x0), lo, hi, kl, kr, D, cfg.dt, cfg.max_steps, cfg.bridge)
        decay = np.exp(-mu * tau)
        y = y0 * decay + ell * np.sqrt(-np.expm1(-2 * mu * tau)) * g.standard_normal(n)
        return side, y, tau

    side, y, tau = _run_blocks(cfg, fn)
    edges = np.asarray(bins) if bins is not None else np.linspace(-6 * ell, 6 * ell, 242)
    idx = np.clip(np.searchsorted(edges, y, side="right") - 1, -1, len(edges) - 1)
    idx[(y < edges[0]) | (y > edges[-1])] = -1
    meta = {"model": "ou", "mu": mu, "D_Y": D_Y, "D": D, "L": iv.L, "x0": x0, "y0": y0,
            "kappa_left": iv.kappa_left, "kappa_right": iv.kappa_right}
    t = _tabulate(side, idx, tau, cfg, meta, list(range(-1, len(edges) - 1)), keep_samples=False)
    t.samples = {"side": side, "y_exit": y, "exit_time": tau, "edges": edges}
    return _check_timeouts(t, strict)


def simulate_rnt(p, x0: float, y0: int, cfg: SimConfig, strict: bool = False,
                 keep_samples: bool = False) -> EstimateTable:
    """Run-and-tumble particle; outcomes are the exit polarity ``-1``/``+1``."""
    check_in_interval(x0, p.L)
    lo, hi = -0.5 * p.L, 0.5 * p.L
    side, out, tau = _run_blocks(cfg, lambda g, n: _telegraph_kernel(
        g, n, float(x0), float(y0), lo, hi, p.D, cfg.dt, p.alpha, 0, p.nu, 0.0, 0.0, 0.0,
        cfg.max_steps, cfg.bridge, cfg.exact_clock))
    meta = {"model": "rnt", "nu": p.nu, "alpha": p.alpha, "D": p.D, "L": p.L, "x0": x0, "y0": y0}
    t = _tabulate(side, out.astype(int), tau, cfg, meta, (-1, 1), keep_samples)
    return _check_timeouts(t, strict)


def simulate_ratchet(p, x0: float, y0: int, cfg: SimConfig, strict: bool = False,
                     keep_samples: bool = False) -> EstimateTable:
    """Flickering piecewise-linear potential; outcomes are ``1`` (on) / ``0`` (off)."""
    check_in_interval(x0, p.L)
    lo, hi = -0.5 * p.L, 0.5 * p.L
    side, out, tau = _run_blocks(cfg, lambda g, n: _telegraph_kernel(
        g, n, float(x0), float(y0), lo, hi, p.D, cfg.dt, p.r, 1, 0.0, p.a,
        -p.alpha_slope, p.beta_slope, cfg.max_steps, cfg.bridge, cfg.exact_clock))
    meta = {"model": "ratchet", "h": p.h, "a": p.a, "r": p.r, "D": p.D, "L": p.L, "x0": x0, "y0": y0}
    t = _tabulate(side, out.astype(int), tau, cfg, meta, (0, 1), keep_samples)
    return _check_timeouts(t, strict)


def simulate_resetting(p, x0: float, cfg: SimConfig, n_max: int = N_MAX_RESETS,
                       strict: bool = False, keep_samples: bool = False) -> EstimateTable:
    """Resetting Brownian motion; outcomes are reset counts, ``n >= n_max`` pooled as ``n_max``."""
    from .resetting import Delta, Discrete, Uniform
    check_in_interval(x0, p.L)
    d = p.dist
    if isinstance(d, Uniform):
        kind, pts, cdf, ulo, uhi = 1, np.zeros(1), np.ones(1), d.lo, d.hi
    elif isinstance(d, Delta):
        kind, pts, cdf, ulo, uhi = 0, np.array([d.x_r], float), np.ones(1), 0.0, 0.0
    elif isinstance(d, Discrete):
        kind, pts, cdf, ulo, uhi = 0, np.array(d.points, float), np.cumsum(d.weights), 0.0, 0.0
        cdf[-1] = 1.0
    else:
        raise TypeError(f"unsupported reset distribution {type(d).__name__}")
    lo, hi = -0.5 * p.L, 0.5 * p.L
    side, out, tau = _run_blocks(cfg, lambda g, n: _reset_kernel(
        g, n, float(x0), lo, hi, p.D, cfg.dt, p.r, kind, pts, cdf, ulo, uhi,
        cfg.max_steps, cfg.bridge, cfg.exact_clock))
    out = np.minimum(out.astype(int), n_max)
    meta = {"model": "resetting", "D": p.D, "r": p.r, "L": p.L, "x0": x0, "n_max": n_max,
            "reset": repr(d)}
    t = _tabulate(side, out, tau, cfg, meta, tuple(range(n_max + 1)), keep_samples)
    return _check_timeouts(t, strict)


def robin_boundary_step(kappa: float, D: float, dt: float, rng: np.random.Generator) -> bool:
    """``True`` (absorbed) with probability ``min(1, kappa sqrt(pi D dt))``, else reflected."""
    if kappa == 0:
        return False
    if math.isinf(kappa):
        return True
    return bool(rng.random() < min(1.0, kappa * math.sqrt(math.pi * D * dt)))


def throughput(cfg: SimConfig, fn, n_trials: int = 200) -> float:
    """Measured simulated steps per second of ``fn(cfg) -> EstimateTable``."""
    import time
    small = SimConfig(cfg.dt, n_trials, cfg.seed, cfg.max_steps, cfg.bridge, cfg.exact_clock, cfg.threads)
    fn(small)  # compile
    t0 = time.perf_counter()
    est = fn(small)
    elapsed = time.perf_counter() - t0
    mean_steps = float(np.mean(est.samples["exit_time"])) / cfg.dt if est.samples else math.nan
    return n_trials * mean_steps / elapsed
