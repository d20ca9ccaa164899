"""
Brownian motion in a piecewise-linear potential that flickers on and off.

The potential rises linearly from ``-L/2`` to its apex ``a`` (height ``h``)
and falls back to zero at ``L/2``; it is present while the hidden telegraph
state is ``on = 1`` and absent while ``off = 0``, switching at rate ``r`` in
both directions.  On each branch the left-exit probabilities are
combinations of a constant and three exponentials ``exp(k_i x)`` whose rates
solve a cubic.  For a root ``k`` the off-state amplitude is
``r / (r - D k^2)`` times the on-state one, which follows from the off-state
equation alone and holds on both branches.

The eight amplitudes (constant plus three exponentials, per branch) are fixed
by the end conditions and by continuity of value and slope at the apex.
Exponentials are referenced to the end of their branch where they are
largest, so every basis function is bounded by one on its branch and the
linear system stays well conditioned.  Right exits use the inversion
``x -> -x, a -> -a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import LEFT, RIGHT, ExitSide, IntervalSpec, JointSplittingTable, check_in_interval
from .errors import IllConditioned, NearDegenerateRoots, ZeroBarrier, ZeroMarginal

ON, OFF = 1, 0
STATES = (ON, OFF)
ZERO_BARRIER = 1e-12
COND_MAX = 1e12
ROOT_SEPARATION = 1e-6


@dataclass(frozen=True)
class RatchetParams:
    """Intermittent piecewise-linear potential.

    Parameters
    ----------
    h : float
        Apex height (negative values give a trap).
    a : float
        Apex position, ``|a| < L/2``.
    r : float
        Switching rate between on and off.
    D : float
        Diffusivity.
    L : float
        Interval length.
    """

    h: float
    a: float
    r: float
    D: float = 1.0
    L: float = 4.0

    def __post_init__(self):
        for name in ("r", "D", "L"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if not math.isfinite(self.h):
            raise ValueError("h must be finite")
        if not abs(self.a) < 0.5 * self.L:
            raise ValueError(f"apex must satisfy |a| < L/2, got a={self.a}, L={self.L}")

    @property
    def alpha_slope(self) -> float:
        return self.h / (0.5 * self.L + self.a)

    @property
    def beta_slope(self) -> float:
        return self.h / (0.5 * self.L - self.a)

    def inverted(self) -> "RatchetParams":
        return RatchetParams(self.h, -self.a, self.r, self.D, self.L)

    def force(self, x):
        """Force ``-V'(x)`` while the potential is on."""
        return np.where(np.asarray(x) <= self.a, -self.alpha_slope, self.beta_slope)


def solve_cubic(p3, p2, p1, p0, newton_steps: int = 8) -> np.ndarray:
    """Roots of ``p3 k^3 + p2 k^2 + p1 k + p0`` polished by Newton iteration."""
    if p3 == 0:
        raise ValueError("leading coefficient must be non-zero")
    c = np.array([p3, p2, p1, p0], dtype=complex)
    roots = np.roots(c).astype(complex)
    dc = np.array([3 * p3, 2 * p2, p1], dtype=complex)
    for i, k in enumerate(roots):
        for _ in range(newton_steps):
            f = np.polyval(c, k)
            df = np.polyval(dc, k)
            if df == 0:
                break
            with np.errstate(over="ignore", invalid="ignore"):
                step = f / df
            if not np.isfinite(step):
                break
            # near a multiple root df ~ 0 and Newton can jump to another root
            if abs(np.polyval(c, k - step)) >= abs(f):
                break
            k = k - step
            if abs(step) <= 1e-16 * max(abs(k), 1.0):
                break
        roots[i] = k
    # real-coefficient cubics: snap roots that are real up to rounding
    scale = max(np.abs(roots).max(), 1e-300)
    roots = np.where(np.abs(roots.imag) < 1e-13 * scale, roots.real + 0j, roots)
    return roots[np.lexsort((roots.imag, roots.real))]


def characteristic_roots(p: RatchetParams) -> tuple[np.ndarray, np.ndarray]:
    """Exponential rates on the rising (``k``) and falling (``kt``) branches."""
    D, r = p.D, p.r
    al, be = p.alpha_slope, p.beta_slope
    k = solve_cubic(1.0, -al / D, -2 * r / D, al * r / D ** 2)
    kt = solve_cubic(1.0, be / D, -2 * r / D, -be * r / D ** 2)
    return k, kt


def off_ratio(k, r, D):
    """Off-state amplitude per unit on-state amplitude for rate ``k``."""
    return r / (r - D * np.asarray(k) ** 2)


def _check_separation(roots):
    scale = np.abs(roots).max()
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(roots[i] - roots[j]) < ROOT_SEPARATION * scale:
                raise NearDegenerateRoots(f"roots {roots[i]} and {roots[j]} nearly coincide; perturb the parameters")


@dataclass(frozen=True)
class _Branch:
    roots: np.ndarray
    ref: np.ndarray        # reference point of each exponential
    ratio: np.ndarray      # off / on amplitude
    lo: float
    hi: float

    def basis(self, x, order=0):
        """Rows ``[d^n/dx^n const, exp terms...]`` for the on and off states."""
        x = np.asarray(x, dtype=float)[..., None]
        e = self.roots ** order * np.exp(self.roots * (x - self.ref))
        const = np.full(x.shape, 1.0 if order == 0 else 0.0, dtype=complex)
        on = np.concatenate([0.5 * const, e], axis=-1)
        off = np.concatenate([0.5 * const, e * self.ratio], axis=-1)
        return on, off


def _branch(roots, lo, hi, r, D):
    ref = np.where(roots.real > 0, hi, lo)
    return _Branch(roots, ref, off_ratio(roots, r, D), lo, hi)


@dataclass(frozen=True)
class RatchetSolution:
    """Left-exit solution for one exit state.

    ``coeffs`` holds ``(c0, A1, A2, A3, d0, B1, B2, B3)``: the constant and
    on-state exponential amplitudes of the two branches, with exponentials
    referenced to ``ref`` points (see the module docstring).
    """

    params: RatchetParams
    y_exit: int
    roots_left: np.ndarray
    roots_right: np.ndarray
    coeffs: np.ndarray
    residual: float
    condition: float
    _b1: _Branch = field(repr=False, compare=False, default=None)
    _b2: _Branch = field(repr=False, compare=False, default=None)

    def evaluate(self, x, y0, order: int = 0, imag_tol: float = 1e-9):
        """``d^order/dx^order pi_{y_exit}(x, y0)`` for left exit."""
        x = np.asarray(x, dtype=float)
        s = 0 if y0 == ON else 1
        c1, c2 = self.coeffs[:4], self.coeffs[4:]
        v1 = self._b1.basis(x, order)[s] @ c1
        v2 = self._b2.basis(x, order)[s] @ c2
        val = np.where(x <= self.params.a, v1, v2)
        leak = np.max(np.abs(val.imag)) if val.size else 0.0
        scale = max(1.0, np.max(np.abs(val.real)) if val.size else 1.0)
        if leak > imag_tol * scale:
            raise IllConditioned(f"imaginary part {leak:.2e} leaked into the solution")
        return val.real

    def branch_values(self, x, y0, branch: int, order: int = 0) -> np.ndarray:
        """Evaluate one branch's analytic form (also beyond its own range)."""
        s = 0 if y0 == ON else 1
        b, c = (self._b1, self.coeffs[:4]) if branch == 1 else (self._b2, self.coeffs[4:])
        return (b.basis(np.asarray(x, dtype=float), order)[s] @ c).real


def _state(y, name="state"):
    if y not in STATES:
        raise ValueError(f"{name} must be on=1 or off=0, got {y!r}")
    return int(y)


@lru_cache(maxsize=256)
def ratchet_solve(p: RatchetParams, y_exit: int) -> RatchetSolution:
    """Solve for the left-exit probabilities ``pi_{y_exit}(x, on/off)``.

    Raises
    ------
    ZeroBarrier
        ``|h| < 1e-12``; use :func:`ratchet_joint`, which delegates to the
        decoupled solver in that case.
    NearDegenerateRoots, IllConditioned
    """
    y1 = _state(y_exit, "y_exit")
    if abs(p.h) < ZERO_BARRIER:
        raise ZeroBarrier("barrier height vanishes; the hidden state decouples from X")
    k, kt = characteristic_roots(p)
    _check_separation(k)
    _check_separation(kt)
    lo, hi, a = -0.5 * p.L, 0.5 * p.L, p.a
    b1 = _branch(k, lo, a, p.r, p.D)
    b2 = _branch(kt, a, hi, p.r, p.D)

    M = np.zeros((8, 8), dtype=complex)
    rhs = np.zeros(8, dtype=complex)
    on, off = b1.basis(lo)
    M[0, :4], M[1, :4] = on, off
    rhs[0], rhs[1] = float(y1 == ON), float(y1 == OFF)
    on, off = b2.basis(hi)
    M[2, 4:], M[3, 4:] = on, off
    for row, order in ((4, 0), (6, 1)):
        on1, off1 = b1.basis(a, order)
        on2, off2 = b2.basis(a, order)
        M[row, :4], M[row, 4:] = on1, -on2
        M[row + 1, :4], M[row + 1, 4:] = off1, -off2
    cond = float(np.linalg.cond(M))
    if not cond < COND_MAX:
        raise IllConditioned(f"boundary-matching system has condition number {cond:.3e}")
    coeffs = np.linalg.solve(M, rhs)
    residual = float(np.max(np.abs(M @ coeffs - rhs)))
    return RatchetSolution(p, y1, k, kt, coeffs, residual, cond, b1, b2)


def _telegraph_joint(p: RatchetParams, x0, y0, side, y_exit):
    from .spectral import decoupled_joint, telegraph_eigensystem
    es = telegraph_eigensystem(p.r, states=(OFF, ON))
    return decoupled_joint(es, p.D, IntervalSpec(p.L), float(x0), y0, side, y_exit)


def ratchet_joint(sol: RatchetSolution | None, p: RatchetParams, x0, y0, side, y_exit) -> float:
    """Joint probability ``Pi(side, y_exit | x0, y0)``.

    ``sol`` may be a left-exit solution for ``(p, y_exit)`` or ``None`` (solved
    and cached on demand).  Right exits solve the inverted configuration.
    """
    y0 = _state(y0, "y0")
    y1 = _state(y_exit, "y_exit")
    side = ExitSide.parse(side)
    check_in_interval(x0, p.L)
    if abs(p.h) < ZERO_BARRIER:
        return _telegraph_joint(p, x0, y0, side, y1)
    if side == LEFT:
        if sol is None or sol.params != p or sol.y_exit != y1:
            sol = ratchet_solve(p, y1)
        x = float(x0)
    else:
        sol = ratchet_solve(p.inverted(), y1)
        x = -float(x0)
    return float(np.clip(sol.evaluate(x, y0), 0.0, 1.0))


def ratchet_table(p: RatchetParams, x0: float, y0: int) -> JointSplittingTable:
    entries = {(side, y1): ratchet_joint(None, p, x0, y0, side, y1) for side in (LEFT, RIGHT) for y1 in STATES}
    return JointSplittingTable(entries, float(x0), y0, meta={"model": "ratchet", "h": p.h, "a": p.a,
                                                             "r": p.r, "D": p.D, "L": p.L})


def ratchet_conditional(p: RatchetParams, x0, prior, side, y_exit) -> float:
    """Posterior probability of exit state ``y_exit`` given the exit side.

    ``prior`` maps the initial state (``1`` on, ``0`` off) to its weight;
    ``None`` is the symmetric prior.
    """
    w = {ON: 0.5, OFF: 0.5} if prior is None else {_state(int(k)): float(v) for k, v in dict(prior).items()}
    if any(v < 0 for v in w.values()) or not sum(w.values()) > 0:
        raise ValueError("prior weights must be non-negative with positive sum")
    y1 = _state(y_exit, "y_exit")
    num = sum(wy * ratchet_joint(None, p, x0, y0, side, y1) for y0, wy in w.items())
    den = sum(wy * ratchet_joint(None, p, x0, y0, side, yy) for y0, wy in w.items() for yy in STATES)
    if not den > 0:
        raise ZeroMarginal(f"exit via {ExitSide.parse(side).label} has zero probability")
    return float(num / den)


def ratchet_residual(sol: RatchetSolution, x, branch: int) -> np.ndarray:
    """Backward-equation residuals on one branch, shape ``(2, len(x))`` (on, off)."""
    p = sol.params
    slope = p.alpha_slope if branch == 1 else -p.beta_slope
    f = {y0: [sol.branch_values(x, y0, branch, n) for n in range(3)] for y0 in STATES}
    r_on = p.D * f[ON][2] - slope * f[ON][1] + p.r * (f[OFF][0] - f[ON][0])
    r_off = p.D * f[OFF][2] + p.r * (f[ON][0] - f[OFF][0])
    return np.array([r_on, r_off])
