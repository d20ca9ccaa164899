"""
Brownian motion with Poissonian stochastic resetting.

The hidden state is the number of resets since the start.  With
``alpha = sqrt(r/D)``, ``C = cosh(alpha L/2)``, ``m = <cosh(alpha x_r)>`` and
``s_sigma = <sinh(alpha (L/2 + sigma x_r))>`` (averages over the reset law)::

    pi_0(x)  = sinh(alpha (L/2 + sigma x)) / sinh(alpha L)
    pi_n(x)  = s_sigma / sinh(alpha L) * q^(n-1) * (1 - cosh(alpha x) / C),  q = 1 - m / C
    pi_R(x)  = s_sigma / sinh(alpha L) * (C - cosh(alpha x)) / m

All ratios of hyperbolic functions are evaluated through exponentials
relative to their largest argument so that ``alpha L`` of several hundred is
harmless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .core import LEFT, RIGHT, ExitSide, JointSplittingTable, check_in_interval
from .errors import ZeroMarginal

AT_LEAST_ONCE = "R"


# ---------------------------------------------------------------------------
# reset distributions
# ---------------------------------------------------------------------------

class ResetDistribution:
    """Law of the post-reset position; subclasses supply the two moments."""

    def m_cosh(self, alpha: float) -> float:
        raise NotImplementedError

    def m_sinh(self, alpha: float, L: float, sigma: int) -> float:
        raise NotImplementedError

    def expect(self, f) -> float:
        """``<f(x_r)>`` by direct evaluation (independent of the moment formulas)."""
        raise NotImplementedError

    def log_mgf(self, t: float) -> float:
        """``log <exp(t x_r)>``, finite for any ``t``."""
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def mean(self) -> float:
        return self.expect(lambda x: x)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Delta(ResetDistribution):
    x_r: float

    def m_cosh(self, alpha):
        return math.cosh(alpha * self.x_r)

    def m_sinh(self, alpha, L, sigma):
        return math.sinh(alpha * (0.5 * L + sigma * self.x_r))

    def expect(self, f):
        return float(f(self.x_r))

    def log_mgf(self, t):
        return t * self.x_r

    def support(self):
        return (self.x_r, self.x_r)

    def sample(self, rng, n):
        return np.full(n, float(self.x_r))


@dataclass(frozen=True)
class Discrete(ResetDistribution):
    points: tuple
    weights: tuple

    def __post_init__(self):
        pts = tuple(float(v) for v in self.points)
        w = np.asarray(self.weights, dtype=float)
        if len(pts) != len(w) or len(pts) == 0:
            raise ValueError("points and weights must be non-empty and of equal length")
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be non-negative with positive sum")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", tuple(float(v) for v in w / w.sum()))

    def m_cosh(self, alpha):
        return float(np.dot(self.weights, np.cosh(alpha * np.asarray(self.points))))

    def m_sinh(self, alpha, L, sigma):
        return float(np.dot(self.weights, np.sinh(alpha * (0.5 * L + sigma * np.asarray(self.points)))))

    def expect(self, f):
        return float(sum(w * f(x) for x, w in zip(self.points, self.weights)))

    def log_mgf(self, t):
        return float(logsumexp(t * np.asarray(self.points), b=np.asarray(self.weights)))

    def support(self):
        return (min(self.points), max(self.points))

    def sample(self, rng, n):
        idx = rng.choice(len(self.points), size=n, p=self.weights)
        return np.asarray(self.points)[idx]


@dataclass(frozen=True)
class Uniform(ResetDistribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("Uniform requires hi > lo")

    def m_cosh(self, alpha):
        w = self.hi - self.lo
        if alpha * w < 1e-8:
            return math.cosh(alpha * 0.5 * (self.hi + self.lo))
        return (math.sinh(alpha * self.hi) - math.sinh(alpha * self.lo)) / (alpha * w)

    def m_sinh(self, alpha, L, sigma):
        w = self.hi - self.lo
        if alpha * w < 1e-8:
            return math.sinh(alpha * (0.5 * L + sigma * 0.5 * (self.hi + self.lo)))
        c = lambda x: math.cosh(alpha * (0.5 * L + sigma * x))
        return sigma * (c(self.hi) - c(self.lo)) / (alpha * w)

    def expect(self, f):
        val, _ = integrate.quad(f, self.lo, self.hi, epsabs=1e-14, epsrel=1e-13)
        return val / (self.hi - self.lo)

    def log_mgf(self, t):
        u = abs(t) * (self.hi - self.lo)
        if u < 1e-12:
            return t * 0.5 * (self.hi + self.lo)
        return max(t * self.hi, t * self.lo) + math.log(-math.expm1(-u) / u)

    def support(self):
        return (self.lo, self.hi)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class ResetParams:
    """Resetting Brownian motion on ``[-L/2, L/2]``."""

    D: float
    r: float
    L: float
    dist: ResetDistribution

    def __post_init__(self):
        for name in ("D", "r", "L"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        lo, hi = self.dist.support()
        if lo < -0.5 * self.L - 1e-12 or hi > 0.5 * self.L + 1e-12:
            raise ValueError(f"reset support [{lo}, {hi}] leaves the interval of length {self.L}")
        q = self.q
        # q < 1 holds exactly; in floating point it may round to 1 when alpha L is huge
        if not 0 <= q <= 1:
            raise ValueError(f"geometric ratio {q} outside [0, 1)")

    @property
    def alpha_r(self) -> float:
        return math.sqrt(self.r / self.D)

    @property
    def C(self) -> float:
        return math.cosh(0.5 * self.alpha_r * self.L)

    @property
    def m_cosh(self) -> float:
        return self.dist.m_cosh(self.alpha_r)

    def m_sinh(self, side) -> float:
        return self.dist.m_sinh(self.alpha_r, self.L, int(ExitSide.parse(side)))

    @property
    def cosh_ratio(self) -> float:
        """``m / C = <cosh(alpha x_r)> / cosh(alpha L/2)`` without overflow."""
        if self.alpha_r * self.L < LOG_SPACE_AL:
            return self.m_cosh / self.C
        return math.exp(_log_moments(self, LEFT)[1])

    @property
    def q(self) -> float:
        """Probability of resetting again after a reset, ``1 - m / C``."""
        return min(1.0, max(0.0, 1.0 - self.cosh_ratio))


# ---------------------------------------------------------------------------
# stable hyperbolic ratios
# ---------------------------------------------------------------------------

def _sinh_ratio(u, v):
    """``sinh(u) / sinh(v)`` for ``0 <= u <= v``, ``v > 0``."""
    u = np.asarray(u, dtype=float)
    return np.exp(u - v) * np.expm1(-2 * u) / np.expm1(-2 * v)


def _bracket(alpha, x, L):
    """``1 - cosh(alpha x) / cosh(alpha L/2)``."""
    ax = np.abs(np.asarray(x, dtype=float)) * alpha
    h = 0.5 * alpha * L
    return -np.expm1(ax - h) * (1 - np.exp(-ax - h)) / (1 + np.exp(-2 * h))


LOG_SPACE_AL = 600.0
_LOG2 = math.log(2.0)


def _log_moments(p: ResetParams, side):
    """``(log s_sigma/sinh(alpha L), log m/C)`` from the reset law's log-MGF."""
    a, L = p.alpha_r, p.L
    sig = int(ExitSide.parse(side))
    lp, lm = p.dist.log_mgf(sig * a), p.dist.log_mgf(-sig * a)
    # s = (e^{aL/2} <e^{sig a x}> - e^{-aL/2} <e^{-sig a x}>) / 2
    log_s = 0.5 * a * L + lp + math.log(-math.expm1(-a * L + lm - lp)) - _LOG2
    log_sinh = a * L + math.log(-math.expm1(-2 * a * L)) - _LOG2
    h = 0.5 * a * L
    log_m = np.logaddexp(p.dist.log_mgf(a), p.dist.log_mgf(-a)) - _LOG2
    log_C = h + math.log1p(math.exp(-2 * h)) - _LOG2
    return log_s - log_sinh, float(log_m - log_C)


def _norm_s(p: ResetParams, side) -> float:
    """``s_sigma / sinh(alpha L)`` with the moment taken in log-safe form."""
    a, L = p.alpha_r, p.L
    sig = int(ExitSide.parse(side))
    f = lambda x: float(_sinh_ratio(a * (0.5 * L + sig * x), a * L))
    if a * L >= LOG_SPACE_AL:
        return math.exp(_log_moments(p, side)[0])
    if isinstance(p.dist, (Delta, Discrete)):
        return p.dist.expect(f)
    return p.m_sinh(side) / math.sinh(a * L)


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def pi0(p: ResetParams, x0, side):
    """Probability of exiting through ``side`` without any reset."""
    check_in_interval(x0, p.L)
    sig = int(ExitSide.parse(side))
    x = np.clip(np.asarray(x0, dtype=float), -0.5 * p.L, 0.5 * p.L)
    return _out(_sinh_ratio(p.alpha_r * (0.5 * p.L + sig * x), p.alpha_r * p.L))


def pin(p: ResetParams, x0, side, n: int):
    """Probability of exiting through ``side`` after exactly ``n`` resets."""
    if n < 0 or int(n) != n:
        raise ValueError("n must be a non-negative integer")
    if n == 0:
        return pi0(p, x0, side)
    check_in_interval(x0, p.L)
    return _out(_norm_s(p, side) * p.q ** (n - 1) * _bracket(p.alpha_r, x0, p.L))


def piR(p: ResetParams, x0, side):
    """Probability of exiting through ``side`` having reset at least once."""
    check_in_interval(x0, p.L)
    return _out(reset_G(p, side) * _bracket(p.alpha_r, x0, p.L))


def p_reset(p: ResetParams, x0):
    """Probability of at least one reset before exit."""
    check_in_interval(x0, p.L)
    a, L = p.alpha_r, p.L
    # 2 sinh(aL/2) cosh(aL/2) / sinh(aL) = 1
    return _out(_bracket(a, x0, L))


def reset_G(p: ResetParams, side) -> float:
    """x-independent factor with ``piR(side) = reset_G(side) * p_reset``."""
    if p.alpha_r * p.L >= LOG_SPACE_AL:
        ls, lr = _log_moments(p, side)
        return math.exp(ls - lr)
    return _norm_s(p, side) / p.cosh_ratio


def reset_conditional(p: ResetParams, x0, side, n) -> float:
    """Posterior ``P(n resets | exit via side)``; ``n = AT_LEAST_ONCE`` for ``n >= 1``."""
    den = pi0(p, x0, side) + piR(p, x0, side)
    if not den > 0:
        raise ZeroMarginal(f"exit via {ExitSide.parse(side).label} has zero probability from x0={x0}")
    num = piR(p, x0, side) if n == AT_LEAST_ONCE else pin(p, x0, side, n)
    return float(num / den)


def reset_table(p: ResetParams, x0: float, n_max: int = 50) -> JointSplittingTable:
    """Joint table over reset counts ``0 .. n_max-1`` plus the pooled tail ``'>=n_max'``."""
    check_in_interval(x0, p.L)
    entries = {}
    for side in (LEFT, RIGHT):
        acc = 0.0
        for n in range(n_max):
            v = float(pin(p, x0, side, n))
            entries[(side, n)] = v
            acc += v if n else 0.0
        entries[(side, f">={n_max}")] = max(float(piR(p, x0, side)) - acc, 0.0)
    return JointSplittingTable(entries, float(x0), 0, meta={"model": "resetting", "D": p.D, "r": p.r, "L": p.L})


def reset_residual(p: ResetParams, x, side, n: int) -> np.ndarray:
    """Residual of ``D pi_n'' - r pi_n + r <pi_{n-1}(x_r)> = 0`` at ``x``.

    The reset average is computed by evaluating ``pi_{n-1}`` under the
    distribution (quadrature for a uniform law), not from its moments.
    """
    a = p.alpha_r
    x = np.asarray(x, dtype=float)
    if n == 0:
        f = pi0(p, x, side)
        d2 = a * a * f
        return p.D * d2 - p.r * f
    cprev = p.dist.expect(lambda xr: float(pin(p, xr, side, n - 1)))
    f = pin(p, x, side, n)
    # pi_n = c (1 - cosh(a x)/C)  =>  pi_n'' = -c a^2 cosh(a x)/C
    c = _norm_s(p, side) * p.q ** (n - 1)
    d2 = -c * a * a * (1 - _bracket(a, x, p.L))
    return p.D * d2 - p.r * f + p.r * cprev


def alpha_star(n: int, L: float, x0: float, dist: ResetDistribution, side=LEFT,
               D: float = 1.0, bracket: Sequence[float] = (1e-3, 50.0)) -> float:
    """Inverse length ``alpha = sqrt(r/D)`` maximizing ``P(n | side)``.

    Scans a log grid for the best point, then refines with a bounded scalar
    minimization around it.
    """
    if n < 1:
        raise ValueError("alpha* is defined for n >= 1")

    def post(al):
        return reset_conditional(ResetParams(D, D * al * al, L, dist), x0, side, n)

    grid = np.geomspace(bracket[0], bracket[1], 200)
    vals = np.array([post(a) for a in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda al: -post(al), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)
