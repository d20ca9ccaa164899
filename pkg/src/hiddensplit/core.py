"""
Shared vocabulary for exit problems on a finite interval.

The observable coordinate lives on ``[-L/2, L/2]``.  Each boundary carries a
permeability ``kappa`` in ``[0, inf]``: ``0`` reflects, ``math.inf`` absorbs
(fully permeable) and anything in between is a Robin boundary.  ``math.inf``
is kept as an exact symbolic value and every closed form branches on it
instead of treating it as a large float.

A :class:`JointSplittingTable` holds the probabilities of leaving through a
given side while the hidden state takes a given value.  Bayes conditioning
on the observed side turns a table into a :class:`Posterior`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from .errors import MissingTable, NoExitPossible, OutOfDomain, ZeroMarginal

NORM_TOL = 1e-8


class ExitSide(enum.IntEnum):
    LEFT = -1
    RIGHT = 1

    def __neg__(self):
        return ExitSide(-int(self))

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "ExitSide":
        """Accept ``-1/+1``, ``'left'/'right'``, ``'L'/'R'`` or an ExitSide."""
        if isinstance(value, ExitSide):
            return value
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("left", "l", "-1", "minus", "-"):
                return cls.LEFT
            if v in ("right", "r", "+1", "1", "plus", "+"):
                return cls.RIGHT
            raise ValueError(f"unknown exit side {value!r}")
        return cls(int(value))


LEFT = ExitSide.LEFT
RIGHT = ExitSide.RIGHT
SIDES = (LEFT, RIGHT)


@dataclass(frozen=True)
class IntervalSpec:
    """Interval ``[-L/2, L/2]`` with per-boundary permeabilities.

    Parameters
    ----------
    L : float
        Interval length, ``L > 0``.
    kappa_left, kappa_right : float
        Robin permeabilities (inverse length).  ``math.inf`` means fully
        permeable, ``0`` reflecting.
    """

    L: float
    kappa_left: float = math.inf
    kappa_right: float = math.inf

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"interval length must be positive and finite, got {self.L}")
        for name in ("kappa_left", "kappa_right"):
            k = getattr(self, name)
            if math.isnan(k) or k < 0:
                raise ValueError(f"{name} must be in [0, inf], got {k}")

    @property
    def half_width(self) -> float:
        return 0.5 * self.L

    @property
    def fully_permeable(self) -> bool:
        return math.isinf(self.kappa_left) and math.isinf(self.kappa_right)

    def kappa(self, side: ExitSide) -> float:
        return self.kappa_left if side == LEFT else self.kappa_right

    def boundary(self, side: ExitSide) -> float:
        return int(side) * self.half_width

    def check_exit_possible(self):
        if self.kappa_left == 0 and self.kappa_right == 0:
            raise NoExitPossible("both boundaries are reflecting (kappa_left = kappa_right = 0)")

    def check_position(self, x0: float, tol: float = 1e-12):
        check_in_interval(x0, self.L, tol)

    def reflected(self) -> "IntervalSpec":
        """Mirror image under ``x -> -x`` (the permeabilities swap)."""
        return IntervalSpec(self.L, self.kappa_right, self.kappa_left)


def check_in_interval(x0, L, tol=1e-12):
    x = np.asarray(x0, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(np.abs(x) > 0.5 * L * (1 + tol) + tol):
        raise OutOfDomain(f"x0={x0!r} outside [-{0.5 * L}, {0.5 * L}]")


@dataclass(frozen=True)
class JointSplittingTable:
    """Joint probabilities of ``(exit side, hidden state at exit)``.

    For a discrete hidden state ``entries`` maps ``(side, label)`` to a
    probability.  For a continuous hidden state ``grid`` is set, the labels
    are indices into it and the entries are densities; masses are obtained
    by trapezoid quadrature over the grid.
    """

    entries: Mapping[tuple, float]
    x0: float
    y0: Hashable
    grid: np.ndarray | None = None
    meta: Mapping = field(default_factory=dict)
    atoms: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        for key, p in self.entries.items():
            if not (p >= -1e-12) or (self.grid is None and p > 1 + 1e-9):
                raise ValueError(f"entry {key} = {p} is not a probability")

    @property
    def continuous(self) -> bool:
        return self.grid is not None

    def outcomes(self):
        seen = []
        for _, label in self.entries:
            if label not in seen:
                seen.append(label)
        return seen

    def side_values(self, side: ExitSide) -> np.ndarray:
        side = ExitSide.parse(side)
        return np.array([self.entries.get((side, y), 0.0) for y in self.outcomes()])

    def marginal(self, side) -> float:
        """P(side | x0, y0), summed or integrated over the hidden outcome."""
        side = ExitSide.parse(side)
        atom = sum(m for (s, _), m in self.atoms.items() if s == side)
        if self.continuous:
            vals = np.array([self.entries.get((side, i), 0.0) for i in range(len(self.grid))])
            return float(np.trapezoid(vals, self.grid)) + atom
        return float(sum(p for (s, _), p in self.entries.items() if s == side)) + atom

    def total_mass(self) -> float:
        return self.marginal(LEFT) + self.marginal(RIGHT)

    def check_normalized(self, tol: float = NORM_TOL):
        mass = self.total_mass()
        if abs(mass - 1.0) > tol:
            raise ValueError(f"table mass {mass!r} differs from 1 by more than {tol}")

    def scaled(self, c: float) -> "JointSplittingTable":
        return JointSplittingTable({k: c * v for k, v in self.entries.items()},
                                   self.x0, self.y0, self.grid, dict(self.meta),
                                   {k: c * v for k, v in self.atoms.items()})


@dataclass(frozen=True)
class Posterior:
    """Distribution of the hidden exit state given the observed exit side."""

    entries: Mapping[Hashable, float]
    conditioning: ExitSide
    prior_provenance: str = ""
    grid: np.ndarray | None = None
    atoms: Mapping[Hashable, float] = field(default_factory=dict)

    def __getitem__(self, label):
        return self.entries[label]

    def values(self) -> np.ndarray:
        return np.array(list(self.entries.values()))

    def total(self) -> float:
        vals = self.values()
        atom = float(sum(self.atoms.values()))
        if self.grid is not None:
            return float(np.trapezoid(vals, self.grid)) + atom
        return float(vals.sum()) + atom


@dataclass(frozen=True)
class ExitEvent:
    """One observed exit: side, hidden state at exit, reset count and time."""

    side: ExitSide
    y_exit: Hashable
    n_resets: int = 0
    exit_time: float = 0.0

    def __post_init__(self):
        if self.n_resets < 0:
            raise ValueError("n_resets must be non-negative")
        if not self.exit_time > 0:
            raise ValueError("exit_time must be positive")


def condition_on_exit(table: JointSplittingTable, side) -> Posterior:
    """Posterior over the hidden exit state given the exit side.

    Raises
    ------
    ZeroMarginal
        If the table assigns no probability to ``side``.
    """
    side = ExitSide.parse(side)
    marginal = table.marginal(side)
    if not marginal > 0:
        raise ZeroMarginal(f"P(exit {side.label} | x0={table.x0}, y0={table.y0}) = 0")
    labels = range(len(table.grid)) if table.continuous else table.outcomes()
    entries = {y: table.entries.get((side, y), 0.0) / marginal for y in labels}
    atoms = {y: m / marginal for (s, y), m in table.atoms.items() if s == side}
    return Posterior(entries, side, f"delta(x0={table.x0}, y0={table.y0})", table.grid, atoms)


def condition_with_prior(tables: Mapping[Hashable, JointSplittingTable],
                         prior: Mapping[Hashable, float], side) -> Posterior:
    """Posterior when the initial condition is drawn from ``prior``.

    ``prior`` maps support points (a ``y0`` label, an ``(x0, y0)`` pair, or
    any key also used in ``tables``) to weights.  A continuous prior over
    ``x0`` is passed as its quadrature weights on a set of nodes.
    """
    side = ExitSide.parse(side)
    weights = {k: float(w) for k, w in prior.items() if w != 0}
    if any(w < 0 for w in weights.values()):
        raise ValueError("prior weights must be non-negative")
    z = sum(weights.values())
    if not z > 0:
        raise ValueError("prior has no mass")
    missing = [k for k in weights if k not in tables]
    if missing:
        raise MissingTable(f"no joint table for prior support point(s) {missing}")

    first = tables[next(iter(weights))]
    numer: dict = {}
    atoms: dict = {}
    denom = 0.0
    for key, w in weights.items():
        t = tables[key]
        labels = range(len(t.grid)) if t.continuous else t.outcomes()
        for y in labels:
            numer[y] = numer.get(y, 0.0) + w / z * t.entries.get((side, y), 0.0)
        for (s, y), m in t.atoms.items():
            if s == side:
                atoms[y] = atoms.get(y, 0.0) + w / z * m
        denom += w / z * t.marginal(side)
    if not denom > 0:
        raise ZeroMarginal(f"exit via {side.label} has zero prior-weighted probability")
    entries = {y: v / denom for y, v in numer.items()}
    return Posterior(entries, side, "prior: " + ", ".join(f"{k}:{w / z:.6g}" for k, w in weights.items()),
                     first.grid, {y: m / denom for y, m in atoms.items()})
