"""
Bayesian inference from exit events.

Two layers: :func:`single_event_posterior` turns a model and an observed exit
side into a posterior over the hidden exit state, and :class:`HypothesisSet`
compounds independent exit observations (one per re-initialized trial) into
a posterior over competing models.  Weights are kept as log-weights so that
long event streams do not underflow.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import LEFT, RIGHT, ExitSide, IntervalSpec, Posterior, condition_with_prior
from .errors import AllZeroLikelihood


@dataclass(frozen=True)
class DecoupledModel:
    """Brownian motion with a decoupled hidden state (any eigensystem)."""

    es: object
    D: float
    iv: IntervalSpec


# ---------------------------------------------------------------------------
# single events
# ---------------------------------------------------------------------------

def _tables(model, x0, labels):
    from .rnt import RnTParams, rnt_table
    from .ratchet import RatchetParams, ratchet_table
    from .spectral import decoupled_table
    if isinstance(model, RnTParams):
        return {y: rnt_table(model, x0, y) for y in labels}
    if isinstance(model, RatchetParams):
        return {y: ratchet_table(model, x0, y) for y in labels}
    if isinstance(model, DecoupledModel):
        return {y: decoupled_table(model.es, model.D, model.iv, x0, y) for y in labels}
    raise TypeError(f"unsupported model {type(model).__name__}")


def _default_prior(model):
    from .rnt import RnTParams
    from .ratchet import RatchetParams
    if isinstance(model, RnTParams):
        return {-1: 0.5, 1: 0.5}
    if isinstance(model, RatchetParams):
        return {1: 0.5, 0: 0.5}
    if isinstance(model, DecoupledModel):
        return dict(zip(model.es.states, model.es.stationary))
    return {0: 1.0}


def single_event_posterior(model, x0: float, prior, side, n_max: int = 50) -> Posterior:
    """Posterior over the hidden exit state after observing ``side``.

    ``model`` is an :class:`~hiddensplit.rnt.RnTParams`,
    :class:`~hiddensplit.ratchet.RatchetParams`,
    :class:`~hiddensplit.resetting.ResetParams` or :class:`DecoupledModel`.
    ``prior`` maps initial hidden states to weights (``None``: symmetric for
    the two-state models, stationary for decoupled ones).  For resetting the
    prior is ignored (the count starts at zero) and the outcomes are reset
    counts ``0 .. n_max-1`` plus ``'>=n_max'``.
    """
    from .resetting import ResetParams, pin, piR, pi0
    side = ExitSide.parse(side)
    if isinstance(model, ResetParams):
        den = pi0(model, x0, side) + piR(model, x0, side)
        if not den > 0:
            from .errors import ZeroMarginal
            raise ZeroMarginal(f"exit via {side.label} has zero probability")
        entries = {n: float(pin(model, x0, side, n)) / den for n in range(n_max)}
        tail = float(piR(model, x0, side)) / den - sum(v for n, v in entries.items() if n)
        entries[f">={n_max}"] = max(tail, 0.0)
        return Posterior(entries, side, "reset count starts at 0")
    prior = _default_prior(model) if prior is None else dict(prior)
    tables = _tables(model, x0, [y for y, w in prior.items() if w])
    return condition_with_prior(tables, prior, side)


def exit_likelihoods(model, x0: float, prior=None) -> dict:
    """``{LEFT: P(left), RIGHT: P(right)}`` for one trial of ``model``."""
    from .resetting import ResetParams, pi0, piR
    if isinstance(model, ResetParams):
        return {s: float(pi0(model, x0, s) + piR(model, x0, s)) for s in (LEFT, RIGHT)}
    prior = _default_prior(model) if prior is None else dict(prior)
    z = sum(prior.values())
    tables = _tables(model, x0, [y for y, w in prior.items() if w])
    return {s: sum(w / z * tables[y].marginal(s) for y, w in prior.items() if w) for s in (LEFT, RIGHT)}


# ---------------------------------------------------------------------------
# compounding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisSet:
    """Competing hypotheses with log-weights.

    ``likelihoods[label]`` maps an exit side to its single-trial probability.
    """

    labels: tuple
    log_weights: tuple
    likelihoods: Mapping[Hashable, Mapping]

    @classmethod
    def from_prior(cls, likelihoods: Mapping[Hashable, Mapping], prior: Mapping[Hashable, float] | None = None):
        labels = tuple(likelihoods)
        if len(labels) < 2:
            raise ValueError("need at least two hypotheses")
        w = np.array([1.0 if prior is None else float(prior[k]) for k in labels])
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("prior weights must be non-negative with positive sum")
        w = w / w.sum()
        lik = {k: {ExitSide.parse(s): float(p) for s, p in likelihoods[k].items()} for k in labels}
        for k, d in lik.items():
            if any(not 0 <= p <= 1 for p in d.values()):
                raise ValueError(f"likelihoods of {k!r} must lie in [0, 1]")
        with np.errstate(divide="ignore"):
            return cls(labels, tuple(np.log(w)), lik)

    @property
    def weights(self) -> dict:
        lw = np.array(self.log_weights)
        w = np.exp(lw - logsumexp(lw))
        return dict(zip(self.labels, w))

    def log_odds(self, a, b) -> float:
        i, j = self.labels.index(a), self.labels.index(b)
        return self.log_weights[i] - self.log_weights[j]


def posterior_update(hs: HypothesisSet, side, likelihoods: Mapping | None = None) -> HypothesisSet:
    """One Bayes step for an observed exit ``side``.

    ``likelihoods`` overrides the per-hypothesis ``P(side)``; by default the
    values stored in ``hs`` are used.
    """
    side = ExitSide.parse(side)
    lik = np.array([(likelihoods[k] if likelihoods is not None else hs.likelihoods[k][side])
                    for k in hs.labels], dtype=float)
    if np.any(lik < 0) or np.any(lik > 1):
        raise ValueError("likelihoods must lie in [0, 1]")
    lw = np.array(hs.log_weights)
    with np.errstate(divide="ignore"):
        new = lw + np.log(lik)
    if not np.any(np.isfinite(new)):
        raise AllZeroLikelihood(f"no hypothesis can produce a {side.label} exit")
    new = new - logsumexp(new)
    return HypothesisSet(hs.labels, tuple(new), hs.likelihoods)


def compound(hs: HypothesisSet, sides: Iterable) -> tuple[HypothesisSet, list]:
    """Fold :func:`posterior_update` over an event stream.

    Returns the final set and a trace of ``(event_index, label, weight)``.
    """
    trace = []
    for i, s in enumerate(sides):
        hs = posterior_update(hs, s)
        for k, w in hs.weights.items():
            trace.append((i, k, w))
    return hs, trace


def exit_kl(p: Mapping, q: Mapping) -> float:
    """KL divergence between two exit-side distributions."""
    out = 0.0
    for s in (LEFT, RIGHT):
        a, b = p[s], q[s]
        if a > 0:
            out += a * (math.log(a) - math.log(b)) if b > 0 else math.inf
    return out


def log_odds_slope(hs: HypothesisSet, sides: Sequence, a, b) -> float:
    """Average growth of ``log(w_a / w_b)`` per event over the stream ``sides``."""
    start = hs.log_odds(a, b)
    for s in sides:
        hs = posterior_update(hs, s)
    return (hs.log_odds(a, b) - start) / len(sides)


# ---------------------------------------------------------------------------
# CSV i/o
# ---------------------------------------------------------------------------

def read_events(path) -> list:
    """Read an event stream with columns ``trial_index, side``."""
    out = []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        for row in csv.DictReader(rows):
            out.append((int(row["trial_index"]), ExitSide.parse(row["side"])))
    out.sort(key=lambda r: r[0])
    return out


def write_events(path, sides: Iterable):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_index", "side"])
        for i, s in enumerate(sides):
            w.writerow([i, ExitSide.parse(s).label])


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_index", "hypothesis", "weight"])
        for i, k, wt in trace:
            w.writerow([i, k, f"{wt:.17g}"])
