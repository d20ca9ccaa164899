"""
Brownian motion with a decoupled hidden state.

When the hidden process ``Y`` evolves independently of the Brownian
coordinate ``X``, the joint splitting probability is a sum over the
eigenmodes of the hidden generator::

    Pi(side, y_exit | x, y) = sum_n  lt_n(y_exit) * u_n(y) * K_n(x, side)

where ``u_n`` / ``lt_n`` are the backward / forward eigenfunctions with
eigenvalue ``lambda_n`` and ``K_n`` solves ``D K'' = lambda_n K`` with the
boundary conditions of the interval.  The ``n = 0`` kernel is the marginal
splitting probability of plain Brownian motion.

Two eigensystems are provided (ripening-spoiling chain, Ornstein-Uhlenbeck)
plus a symmetric telegraph chain and a constructor from an arbitrary rate
matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np

from .core import LEFT, RIGHT, ExitSide, IntervalSpec, JointSplittingTable, check_in_interval
from .errors import DegenerateRates, GridTooNarrow, TruncationWarning

TRUNCATION_TOL = 1e-6


# ---------------------------------------------------------------------------
# eigensystems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Eigensystem:
    """Biorthonormal eigensystem of a hidden-state generator.

    Attributes
    ----------
    eigenvalues : ndarray, shape (N,)
        Relaxation rates ``lambda_n >= 0`` with ``lambda_0 = 0``.
    right : ndarray, shape (N, M)
        Backward eigenfunctions ``u_n`` on the hidden states (or grid).
    left : ndarray, shape (N, M)
        Forward eigenfunctions ``lt_n``; ``left[0]`` is the stationary law.
    states : sequence
        Discrete labels, or the quadrature grid for a continuous space.
    basis : callable, optional
        ``basis(y) -> (left_n(y), right_n(y))`` for off-grid evaluation of a
        continuous eigensystem.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    states: tuple | np.ndarray
    continuous: bool = False
    name: str = ""
    basis: Callable | None = field(default=None, compare=False, repr=False)
    scale: float = 1.0
    rate: float = 0.0

    @property
    def truncation(self) -> int:
        return len(self.eigenvalues)

    @property
    def stationary(self) -> np.ndarray:
        return self.left[0]

    def index(self, label: Hashable) -> int:
        if self.continuous:
            raise TypeError("continuous eigensystem has no discrete labels")
        try:
            return self.states.index(label)
        except ValueError:
            raise KeyError(f"unknown hidden state {label!r}; expected one of {self.states}") from None

    def right_at(self, y) -> np.ndarray:
        if self.continuous:
            return self.basis(float(y))[1]
        return self.right[:, self.index(y)]

    def left_at(self, y) -> np.ndarray:
        if self.continuous:
            return self.basis(float(y))[0]
        return self.left[:, self.index(y)]

    def modes_on(self, y, n_modes: int):
        """``(left, right)`` with ``n_modes`` modes evaluated at ``y`` (continuous only)."""
        return self.basis(y, n_modes)

    def gram(self, grid=None) -> np.ndarray:
        """Matrix of inner products ``<lt_n, u_m>``.

        Continuous spaces use the trapezoid rule on ``grid`` (default: a
        verification grid covering the support of every retained mode).
        """
        if self.continuous:
            g = verification_grid(self) if grid is None else np.asarray(grid, dtype=float)
            left, right = self.basis(g, self.truncation)
            return np.trapezoid(left[:, None, :] * right[None, :, :], g, axis=-1)
        return self.left @ self.right.T

    def biorthonormality_error(self, grid=None) -> float:
        return float(np.max(np.abs(self.gram(grid) - np.eye(self.truncation))))


def ripening_eigensystem(r: float, s: float) -> Eigensystem:
    """Eigensystem of the irreversible chain ``U -(r)-> R -(s)-> S``.

    Components are ordered ``(U, R, S)``.  The rates must differ; for
    ``r == s`` the generator is not diagonalisable.
    """
    if not (r > 0 and s > 0):
        raise ValueError("ripening rates must be positive")
    if abs(r - s) / max(r, s) < 1e-9:
        raise DegenerateRates(f"r={r} and s={s} coincide; eigenvectors do not span the state space")
    lam = np.array([0.0, r, s])
    left = np.array([
        [0.0, 0.0, 1.0],
        [s - r, r, -s],
        [0.0, -1.0, 1.0],
    ])
    right = np.array([
        [1.0, 1.0, 1.0],
        [1.0 / (s - r), 0.0, 0.0],
        [-r / (r - s), -1.0, 0.0],
    ])
    return Eigensystem(lam, right, left, ("U", "R", "S"), name=f"ripening(r={r}, s={s})")


def telegraph_eigensystem(rate: float, states=(0, 1)) -> Eigensystem:
    """Symmetric two-state chain switching at ``rate`` in both directions."""
    if not rate > 0:
        raise ValueError("switching rate must be positive")
    lam = np.array([0.0, 2.0 * rate])
    left = np.array([[0.5, 0.5], [-0.5, 0.5]])
    right = np.array([[1.0, 1.0], [-1.0, 1.0]])
    return Eigensystem(lam, right, left, tuple(states), name=f"telegraph(rate={rate})")


def eigensystem_from_generator(Q, states) -> Eigensystem:
    """Numerical eigensystem of a forward rate matrix ``Q`` (columns sum to 0).

    ``Q[i, j]`` is the rate ``j -> i``.  Eigenvalues must be real and
    distinct.  Normalisation: ``lt_0`` sums to one, ``<lt_n, u_m> = delta``.
    """
    Q = np.asarray(Q, dtype=float)
    w, vl = np.linalg.eig(Q)
    if np.max(np.abs(w.imag)) > 1e-10:
        raise ValueError("generator has complex eigenvalues")
    order = np.argsort(-w.real)
    lam = -w.real[order]
    lam[0] = 0.0 if abs(lam[0]) < 1e-10 else lam[0]
    vl = vl.real[:, order].T
    right = np.linalg.inv(vl).T
    s = vl[0].sum()
    vl[0] /= s
    right[0] *= s
    return Eigensystem(lam, right, vl, tuple(states), name="generator")


def hermite_functions(z, N: int) -> np.ndarray:
    """Scaled probabilists' Hermite polynomials ``He_n(z) / sqrt(n!)``, n < N.

    Uses the three-term recurrence, which stays O(1)-bounded against the
    Gaussian weight where the plain polynomials overflow.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((N,) + z.shape)
    out[0] = 1.0
    if N > 1:
        out[1] = z
    for n in range(1, N - 1):
        out[n + 1] = (z * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


def default_ou_grid(ell: float, n_points: int = 241, width: float = 6.0) -> np.ndarray:
    return np.linspace(-width * ell, width * ell, n_points)


def ou_eigensystem(mu: float, D_Y: float, N: int = 40, grid=None) -> Eigensystem:
    """Hermite eigensystem of the zero-mean OU process ``dY = -mu Y dt + sqrt(2 D_Y) dW``.

    With ``ell = sqrt(D_Y / mu)``: ``lambda_n = n mu``, ``u_n = He_n(y/ell)``
    and ``lt_n = He_n(y/ell) exp(-y^2 / 2 ell^2) / (n! ell sqrt(2 pi))``.
    Internally ``u_n`` and ``lt_n`` are rescaled by ``sqrt(n!)`` in opposite
    directions; products ``lt_n u_n`` are unchanged.

    ``N`` is the minimum number of modes; mode sums extend it on demand
    (see :func:`required_modes`).
    """
    if not (mu > 0 and D_Y > 0):
        raise ValueError("OU parameters mu and D_Y must be positive")
    if N < 1:
        raise ValueError("need at least one mode")
    ell = math.sqrt(D_Y / mu)
    grid = default_ou_grid(ell) if grid is None else np.asarray(grid, dtype=float)
    if grid.min() > -6 * ell * (1 - 1e-9) or grid.max() < 6 * ell * (1 - 1e-9):
        raise GridTooNarrow(f"grid [{grid.min()}, {grid.max()}] does not cover +-6 ell = +-{6 * ell}")

    def basis(y, n_modes=N):
        z = np.asarray(y, dtype=float) / ell
        h = hermite_functions(z, n_modes)
        gauss = np.exp(-0.5 * z * z) / (ell * math.sqrt(2 * math.pi))
        return h * gauss, h

    left, right = basis(grid)
    lam = mu * np.arange(N, dtype=float)
    return Eigensystem(lam, right, left, grid, continuous=True,
                       name=f"ou(mu={mu}, D_Y={D_Y}, N={N})", basis=basis,
                       scale=ell, rate=mu)


def verification_grid(es: Eigensystem, spacing: float = 0.025) -> np.ndarray:
    """Grid wide enough that every retained Hermite mode has decayed at its edges."""
    half = (math.sqrt(4 * es.truncation + 2) + 8.0) * es.scale
    n = int(math.ceil(2 * half / (spacing * es.scale))) + 1
    return np.linspace(-half, half, n)


# ---------------------------------------------------------------------------
# mode kernels
# ---------------------------------------------------------------------------

def _robin_weights(kappa):
    # boundary condition b * dPi/dn + a * Pi = a * target, in homogeneous form
    return (1.0, 0.0) if math.isinf(kappa) else (float(kappa), 1.0)


def mode_kernel(q, iv: IntervalSpec, x, side) -> np.ndarray:
    """Kernel ``K(x)`` with ``K'' = q^2 K`` and the interval's boundary conditions.

    ``K`` equals 1 (Robin: is driven towards 1) on the exit side and 0 on the
    other.  ``q = sqrt(lambda / D)``; ``q = 0`` returns the analytic limit,
    i.e. the Brownian marginal splitting probability.  Evaluated with
    decaying exponentials only, so large ``q L`` cannot overflow.
    """
    side = ExitSide.parse(side)
    q = np.asarray(q, dtype=float)
    x = float(x)
    L = iv.L
    if side == LEFT:
        (a1, b1), (a2, b2) = _robin_weights(iv.kappa_left), _robin_weights(iv.kappa_right)
        u = 0.5 * L - x
    else:
        (a1, b1), (a2, b2) = _robin_weights(iv.kappa_right), _robin_weights(iv.kappa_left)
        u = 0.5 * L + x
    u = min(max(u, 0.0), L)

    zero_den = a1 * a2 * L + a1 * b2 + b1 * a2
    if zero_den == 0:
        iv.check_exit_possible()
    k0 = a1 * (b2 + a2 * u) / zero_den if zero_den else 0.0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e_u = np.exp(-2 * q * u)
        e_L = np.exp(-2 * q * L)
        num = a1 * (q * b2 * (1 + e_u) - a2 * np.expm1(-2 * q * u)) * np.exp(-q * (L - u))
        den = -(q * q * b1 * b2 + a1 * a2) * np.expm1(-2 * q * L) + q * (a1 * b2 + b1 * a2) * (1 + e_L)
        out = num / den
    return np.where(q == 0, k0, out)


def brownian_splitting(iv: IntervalSpec, x0, side) -> float:
    """Marginal splitting probability of plain Brownian motion (Robin-aware)."""
    return float(mode_kernel(0.0, iv, x0, side))


def robin_S(iv: IntervalSpec, x0) -> tuple[float, float]:
    """``(S(x0), S~(x0))``: Brownian left/right splitting probabilities."""
    return brownian_splitting(iv, x0, LEFT), brownian_splitting(iv, x0, RIGHT)


# ---------------------------------------------------------------------------
# joint splitting probabilities
# ---------------------------------------------------------------------------

MODE_TOL = 1e-10
MODE_CAP = 20000


def required_modes(es: Eigensystem, D, iv, x0, side, tol=MODE_TOL, cap=MODE_CAP) -> int:
    """Number of modes needed so the dropped kernels fall below ``tol``.

    Discrete eigensystems are complete and return their size.  For the OU
    system the kernel decays like ``exp(-sqrt(n mu / D) d)`` with ``d`` the
    distance to the exit boundary, so the count grows as ``d -> 0``; it is
    capped at ``cap`` (a :class:`TruncationWarning` then reports the error).
    """
    if not es.continuous or es.rate <= 0:
        return es.truncation
    n = np.arange(cap)
    k = np.abs(mode_kernel(np.sqrt(es.rate * n / D), iv, x0, side))
    ref = max(k[0], 1e-300)
    big = np.nonzero(k > tol * ref)[0]
    need = int(big[-1]) + 1 if big.size else 1
    return max(es.truncation, min(need, cap))


def _mode_terms(es: Eigensystem, D, iv, x0, y0, side):
    if not D > 0:
        raise ValueError("diffusivity must be positive")
    iv.check_exit_possible()
    check_in_interval(x0, iv.L)
    N = required_modes(es, D, iv, x0, side)
    if es.continuous:
        lam = es.rate * np.arange(N) if es.rate > 0 else es.eigenvalues
        right0 = es.modes_on(float(y0), N)[1] if N != es.truncation else es.right_at(y0)
    else:
        lam, right0 = es.eigenvalues, es.right_at(y0)
    q = np.sqrt(np.maximum(lam, 0.0) / D)
    return right0 * mode_kernel(q, iv, x0, side)


def _truncation_meta(es: Eigensystem, contrib: np.ndarray, total) -> dict:
    # a discrete eigensystem with one mode per state is complete: nothing is truncated
    if not es.continuous:
        return {"modes": int(len(contrib)), "last_mode_fraction": 0.0, "truncation_warning": False}
    scale = max(float(np.max(np.abs(total))), 1e-300)
    rel = float(np.max(np.abs(contrib[-1]))) / scale
    return {"modes": int(len(contrib)), "last_mode_fraction": rel,
            "truncation_warning": bool(rel > TRUNCATION_TOL)}


def _absorbing_start(iv: IntervalSpec, x0):
    """Exit side if ``x0`` sits on a fully permeable boundary, else ``None``."""
    for side in (LEFT, RIGHT):
        if math.isinf(iv.kappa(side)) and abs(x0 - iv.boundary(side)) <= 1e-14 * max(1.0, iv.L):
            return side
    return None


def decoupled_joint(es: Eigensystem, D: float, iv: IntervalSpec, x0: float, y0, side, y_exit) -> float:
    """``Pi(side, y_exit | x0, y0)`` for Brownian motion with a decoupled hidden state.

    For a continuous eigensystem the return value is a density in ``y_exit``
    (``inf`` at ``y_exit == y0`` when starting on an absorbing boundary).
    Emits :class:`TruncationWarning` when the last retained mode still
    contributes more than ``1e-6`` of the sum.
    """
    side = ExitSide.parse(side)
    start = _absorbing_start(iv, x0)
    if start is not None:
        if start != side:
            return 0.0
        if es.continuous:
            return math.inf if float(y_exit) == float(y0) else 0.0
        return 1.0 if y_exit == y0 else 0.0
    coeff = _mode_terms(es, D, iv, x0, y0, side)
    if es.continuous:
        left = es.modes_on(float(y_exit), len(coeff))[0]
    else:
        left = es.left_at(y_exit)
    terms = coeff * left
    total = terms.sum()
    meta = _truncation_meta(es, terms, total)
    if meta["truncation_warning"]:
        warnings.warn(f"last mode carries {meta['last_mode_fraction']:.2e} of the sum; "
                      "increase the number of modes", TruncationWarning, stacklevel=2)
    return float(total)


def decoupled_table(es: Eigensystem, D: float, iv: IntervalSpec, x0: float, y0) -> JointSplittingTable:
    """All joint probabilities (densities on the eigensystem grid if continuous)."""
    meta = {"model": es.name, "D": D, "L": iv.L,
            "kappa_left": iv.kappa_left, "kappa_right": iv.kappa_right}
    grid = np.asarray(es.states) if es.continuous else None
    labels = list(range(len(es.states))) if es.continuous else list(es.states)
    start = _absorbing_start(iv, x0)
    if start is not None:
        iv.check_exit_possible()
        entries = {(side, lab): 0.0 for side in (LEFT, RIGHT) for lab in labels}
        if es.continuous:
            return JointSplittingTable(entries, float(x0), y0, grid, meta, atoms={(start, float(y0)): 1.0})
        entries[(start, y0)] = 1.0
        return JointSplittingTable(entries, float(x0), y0, None, meta)

    entries = {}
    warn = False
    for side in (LEFT, RIGHT):
        coeff = _mode_terms(es, D, iv, x0, y0, side)
        left = es.modes_on(grid, len(coeff))[0] if es.continuous and len(coeff) != es.truncation else es.left
        vals = coeff @ left
        m = _truncation_meta(es, coeff[:, None] * left, vals)
        warn |= m["truncation_warning"]
        meta[f"modes_{side.label}"] = m["modes"]
        meta[f"last_mode_fraction_{side.label}"] = m["last_mode_fraction"]
        for lab, v in zip(labels, vals):
            # Gibbs ripples of a truncated sum can dip below zero by ~ the truncation error
            entries[(side, lab)] = float(max(v, 0.0)) if es.continuous else float(v)
    meta["truncation_warning"] = warn
    if warn:
        warnings.warn("mode sum truncated before convergence", TruncationWarning, stacklevel=2)
    return JointSplittingTable(entries, float(x0), y0, grid, meta)


def decoupled_marginal(es: Eigensystem, D, iv, x0, y0, side) -> float:
    """Sum/integral of the mode sum over ``y_exit`` using ``<lt_n, 1>`` analytically.

    Discrete spaces use the exact sum over states; continuous ones use
    ``int lt_n dy = delta_{n0}``, which leaves the ``n = 0`` kernel.
    """
    side = ExitSide.parse(side)
    start = _absorbing_start(iv, x0)
    if start is not None:
        return 1.0 if start == side else 0.0
    terms = _mode_terms(es, D, iv, x0, y0, side)
    if es.continuous:
        return float(terms[0])
    return float(terms @ es.left.sum(axis=1))


def decoupled_factorization_limit(es: Eigensystem, iv: IntervalSpec, x0: float):
    """Small-``D`` (large-``L``) limit factors ``(rho_steady, S(x0), S~(x0))``.

    In this limit ``Pi(left, y | x0, y0) -> rho_steady(y) * S(x0)`` and
    ``Pi(right, y | x0, y0) -> rho_steady(y) * S~(x0)`` for every ``y0``.
    """
    check_in_interval(x0, iv.L)
    iv.check_exit_possible()
    S, St = robin_S(iv, x0)
    return es.stationary.copy(), S, St


def stationary_prior_table(es: Eigensystem, D, iv, x0) -> JointSplittingTable:
    """Joint table averaged over ``y0`` drawn from the stationary law (discrete only)."""
    if es.continuous:
        raise TypeError("use condition_with_prior with quadrature weights for continuous spaces")
    rho = es.stationary
    entries = {}
    for side in (LEFT, RIGHT):
        k = mode_kernel(np.sqrt(es.eigenvalues / D), iv, x0, side)
        avg_right = rho @ es.right.T       # <rho, u_n>
        vals = (avg_right * k) @ es.left
        for lab, v in zip(es.states, vals):
            entries[(side, lab)] = float(v)
    return JointSplittingTable(entries, float(x0), "stationary", None, {"model": es.name})
