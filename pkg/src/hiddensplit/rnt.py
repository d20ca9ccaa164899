"""
Run-and-tumble particle on an interval with absorbing ends.

The particle moves as ``dX = nu * Y dt + sqrt(2 D) dW`` with a polarity
``Y = +-1`` that flips at rate ``alpha``.  For exit through the left end in
state ``y1`` the sum and difference

    rho(x)   = pi(x, -) + pi(x, +)
    sigma(x) = pi(x, -) - pi(x, +)

solve a pair of linear ODEs with solutions built from ``exp(+-k x)``, a
constant and a linear term, ``k = sqrt(nu^2/D^2 + 2 alpha/D)``.  The raw
integration constants contain ``cosh(kL/2)`` and ``csch(kL/2)``; everything
here is evaluated in terms of ``E = exp(-kL)`` and exponentials referenced to
the nearest boundary so that neither large ``kL`` nor ``nu -> 0`` overflows.

Right-side exits follow from the mirror symmetry
``Pi(right, y1 | x, y0) = Pi(left, -y1 | -x, -y0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LEFT, RIGHT, ExitSide, JointSplittingTable, check_in_interval
from .errors import ZeroMarginal

STATES = (-1, 1)


@dataclass(frozen=True)
class RnTParams:
    """Run-and-tumble parameters.

    Parameters
    ----------
    nu : float
        Self-propulsion speed, ``>= 0``.
    alpha : float
        Tumble (polarity flip) rate, ``> 0``.
    D : float
        Translational diffusivity, ``> 0``.
    L : float
        Interval length, ``> 0``.
    """

    nu: float
    alpha: float
    D: float
    L: float = 1.0

    def __post_init__(self):
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        for name in ("alpha", "D", "L"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def k(self) -> float:
        return math.sqrt(self.nu ** 2 / self.D ** 2 + 2 * self.alpha / self.D)

    @property
    def Pe(self) -> float:
        return self.nu ** 2 / (self.alpha * self.D)

    def with_L(self, L) -> "RnTParams":
        return RnTParams(self.nu, self.alpha, self.D, L)


def _check_state(y, name="state"):
    if y not in STATES:
        raise ValueError(f"{name} must be -1 or +1, got {y!r}")
    return int(y)


@dataclass(frozen=True)
class _Scaled:
    # sigma(x) = c1 + C3 exp(k(x - L/2)) + C2 exp(-k(x + L/2))
    # rho(x)   = c4s + g * (C3 exp(k(x - L/2)) - C2 exp(-k(x + L/2))) - b x
    k: float
    L: float
    g: float      # nu / (D k)
    c1: float
    C2: float
    C3: float
    c4s: float    # g * c4
    b: float      # 2 alpha c1 / nu


def _scaled_constants(p: RnTParams, y1: int) -> _Scaled:
    k, L, nu = p.k, p.L, p.nu
    g = nu / (p.D * k)
    E = math.exp(-k * L)
    omE = -math.expm1(-k * L)
    den = p.alpha * L * (1 + E) + nu * g * omE
    top = (1 + E) - y1 * g * omE
    c1 = 0.5 * nu * top / den
    C2 = -0.25 * y1 * (2 * (p.alpha * L + y1 * nu) / den + 2 / omE)
    C3 = -0.25 * y1 * (2 * (p.alpha * L + y1 * nu) / den - 2 / omE)
    c4s = 0.5 * (1 - y1 * g * (1 + E) / omE)
    b = p.alpha * top / den
    return _Scaled(k, L, g, c1, C2, C3, c4s, b)


def rnt_constants(p: RnTParams, y1: int) -> tuple[float, float, float, float]:
    """Integration constants ``(c1, c2, c3, c4)`` of ``sigma`` and ``rho``.

    These multiply ``1``, ``exp(-kx)``, ``exp(kx)`` and the constant in
    ``rho`` respectively.  ``c2`` and ``c3`` grow like ``exp(-kL/2)`` times a
    bounded factor and underflow/overflow for ``kL`` beyond ~1400; the
    solvers use rescaled versions internally.  At ``nu = 0`` the constant
    ``c4`` is infinite (it only ever appears multiplied by ``nu``).
    """
    y1 = _check_state(y1, "y1")
    s = _scaled_constants(p, y1)
    half = 0.5 * p.k * p.L
    c2 = s.C2 * math.exp(-half)
    c3 = s.C3 * math.exp(-half)
    c4 = s.c4s / s.g if s.g > 0 else math.inf
    return s.c1, c2, c3, c4


def _rho_sigma(s: _Scaled, x, order=0):
    x = np.asarray(x, dtype=float)
    ep = np.exp(s.k * (x - 0.5 * s.L))
    em = np.exp(-s.k * (x + 0.5 * s.L))
    kk = s.k ** order
    if order == 0:
        sig = s.c1 + s.C3 * ep + s.C2 * em
        rho = s.c4s + s.g * (s.C3 * ep - s.C2 * em) - s.b * x
    else:
        sgn = (-1) ** order
        sig = kk * (s.C3 * ep + sgn * s.C2 * em)
        rho = s.g * kk * (s.C3 * ep - sgn * s.C2 * em) - (s.b if order == 1 else 0.0)
    return rho, sig


def _left_joint(p: RnTParams, x, y0, y1, order=0):
    rho, sig = _rho_sigma(_scaled_constants(p, y1), x, order)
    return 0.5 * (rho - y0 * sig)


def rnt_joint(p: RnTParams, x0, y0, side, y_exit):
    """Joint probability ``Pi(side, y_exit | x0, y0)``; vectorized over ``x0``."""
    y0 = _check_state(y0, "y0")
    y1 = _check_state(y_exit, "y_exit")
    side = ExitSide.parse(side)
    check_in_interval(x0, p.L)
    x = np.asarray(x0, dtype=float)
    if side == LEFT:
        out = _left_joint(p, x, y0, y1)
    else:
        out = _left_joint(p, -x, -y0, -y1)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def rnt_joint_derivative(p: RnTParams, x0, y0, y_exit, order: int):
    """``d^order/dx^order`` of the left-exit joint probability (order 0, 1 or 2)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    return _left_joint(p, x0, _check_state(y0), _check_state(y_exit), order)


def rnt_residual(p: RnTParams, x, y_exit) -> np.ndarray:
    """Residuals of the backward equations for both initial polarities.

    Returns an array of shape ``(2, len(x))`` for ``y0 = +1`` and ``y0 = -1``.
    """
    x = np.asarray(x, dtype=float)
    f = {y0: [rnt_joint_derivative(p, x, y0, y_exit, n) for n in range(3)] for y0 in STATES}
    rp = p.nu * f[1][1] + p.D * f[1][2] + p.alpha * (f[-1][0] - f[1][0])
    rm = -p.nu * f[-1][1] + p.D * f[-1][2] + p.alpha * (f[1][0] - f[-1][0])
    return np.array([rp, rm])


def rnt_table(p: RnTParams, x0: float, y0: int) -> JointSplittingTable:
    y0 = _check_state(y0, "y0")
    check_in_interval(x0, p.L)
    x0 = float(x0)
    entries = {(side, y1): rnt_joint(p, x0, y0, side, y1) for side in (LEFT, RIGHT) for y1 in STATES}
    return JointSplittingTable(entries, x0, y0, meta={"model": "rnt", "nu": p.nu, "alpha": p.alpha,
                                                      "D": p.D, "L": p.L})


def _prior(prior) -> dict:
    if prior is None:
        return {-1: 0.5, 1: 0.5}
    w = {_check_state(int(k), "prior state"): float(v) for k, v in dict(prior).items()}
    if any(v < 0 for v in w.values()) or not sum(w.values()) > 0:
        raise ValueError("prior weights must be non-negative with positive sum")
    z = sum(w.values())
    return {k: v / z for k, v in w.items()}


def rnt_conditional(p: RnTParams, x0, prior, side, y_exit) -> float:
    """Posterior probability of exit polarity ``y_exit`` given the exit side.

    ``prior`` maps the initial polarity (``-1``/``+1``) to its probability;
    ``None`` means the symmetric prior.
    """
    w = _prior(prior)
    y1 = _check_state(y_exit, "y_exit")
    num = sum(wy * rnt_joint(p, x0, y0, side, y1) for y0, wy in w.items())
    den = sum(wy * rnt_joint(p, x0, y0, side, yy) for y0, wy in w.items() for yy in STATES)
    if not den > 0:
        raise ZeroMarginal(f"exit via {ExitSide.parse(side).label} has zero probability")
    return float(num / den)


def rnt_asymptote(Pe: float, tol: float = 1e-8, max_doublings: int = 40) -> float:
    """Large-``L`` limit of ``P(y_exit = -1 | left exit, x0 = 0)``, symmetric prior.

    Evaluated with ``alpha = D = 1`` and ``nu = sqrt(Pe)``, starting at
    ``kL = 50`` and doubling ``L`` until the value moves by less than ``tol``.
    """
    if not Pe > 0:
        raise ValueError("Pe must be positive")
    p = RnTParams(math.sqrt(Pe), 1.0, 1.0, 1.0)
    L = 50.0 / p.k
    prev = rnt_conditional(p.with_L(L), 0.0, None, LEFT, -1)
    for _ in range(max_doublings):
        L *= 2
        cur = rnt_conditional(p.with_L(L), 0.0, None, LEFT, -1)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return cur
