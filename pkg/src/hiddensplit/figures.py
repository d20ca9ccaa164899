"""
Parameter sets and data generators for the reference figures.

Each generator returns ``(columns, rows, meta)``.  Passing an
:class:`~hiddensplit.mc.SimConfig` adds Monte-Carlo columns (estimate and
standard error) at a coarse set of marker positions for the figures that
carry simulation markers; without it only the analytic curves are produced.
"""
from __future__ import annotations

import math

import numpy as np

from .core import LEFT, RIGHT, IntervalSpec, condition_on_exit
from .errors import UnknownFigure

KAPPAS = (0.0, 1.0, 10.0, math.inf)

FIG1 = dict(r=1.0, s=10.0, D=0.3, L=1.0)
FIG2 = dict(D=1.0, D_Y=1.0, mu=1.0, x0=0.0, y0=1.0, Ls=(0.5, 2.0, 8.0))
FIG3 = dict(nu=1.0, D=0.1, alpha=2.0, L=1.0)
FIG4_PE = (0.1, 1.0, 10.0)
FIG5 = dict(L=4.0, r=1.0, D=1.0, hs=(1.0, 2.0, -1.0, -2.0), apexes=(-1.0, 0.0, 1.0))
FIG7 = dict(D=1.0, r=2.0, L=1.0, x_r=0.2)
FIG8 = dict(L=5.0, x_r=0.2, x0=0.0, D=1.0, alphas=(0.25, 0.5, 1.0, 2.0), ns=(1, 2, 3, 5))

MARKERS = 11


def x_grid(L, n=101):
    """Positions ``x0/L = 0, 1/(n-1), ..., 1`` mapped to ``[-L/2, L/2]``."""
    return -0.5 * L + L * np.arange(n) / (n - 1)


def _kname(k):
    return "inf" if math.isinf(k) else f"{k:g}"


def fig4_triples(Pe):
    """Three ``(nu, alpha, D)`` choices with the same Peclet number."""
    return {"solid": (math.sqrt(Pe), 1.0, 1.0),
            "dashed": (1.0, 1.0 / Pe, 1.0),
            "dotted": (1.0, 1.0, 1.0 / Pe)}


# ---------------------------------------------------------------------------
# analytic curves
# ---------------------------------------------------------------------------

def fig1(panel="a", mc=None):
    from .spectral import decoupled_table, ripening_eigensystem
    p = FIG1
    es = ripening_eigensystem(p["r"], p["s"])
    xs = x_grid(p["L"])
    cols = ["x0"]
    data = []
    for k in KAPPAS:
        iv = IntervalSpec(p["L"], math.inf, k)
        vals = []
        for x in xs:
            t = decoupled_table(es, p["D"], iv, float(x), "U")
            if panel == "a":
                vals.append(t.entries[(LEFT, "R")])
            else:
                m = t.marginal(LEFT)
                vals.append(t.entries[(LEFT, "R")] / m if m > 0 else math.nan)
        cols.append(f"{'pi_left_R' if panel == 'a' else 'cond_R_given_left'}_kappa_{_kname(k)}")
        data.append(vals)
    rows = [[x, *col] for x, *col in zip(xs, *data)]
    meta = {"figure": f"fig1{panel}", "params": {**p, "y0": "U", "kappa_left": "inf",
                                                  "kappa_right": [_kname(k) for k in KAPPAS]}}
    if mc is not None and panel == "a":
        cols, rows = _overlay(cols, rows, xs, mc, _mc_fig1)
    return cols, rows, meta


def _mc_fig1(x, cfg):
    from .mc import simulate_ripening
    p = FIG1
    out = []
    for k in KAPPAS:
        est = simulate_ripening(p["r"], p["s"], p["D"], IntervalSpec(p["L"], math.inf, k), x, "U", cfg)
        out += [(f"mc_pi_left_R_kappa_{_kname(k)}", est.p_hat(LEFT, "R"), est.std_err(LEFT, "R"))]
    return out


def fig2(mc=None):
    from .spectral import decoupled_table, ou_eigensystem
    p = FIG2
    es = ou_eigensystem(p["mu"], p["D_Y"])
    ys = np.asarray(es.states)
    cols = ["y_exit"]
    data = []
    for L in p["Ls"]:
        t = decoupled_table(es, p["D"], IntervalSpec(L), p["x0"], p["y0"])
        post = condition_on_exit(t, LEFT)
        cols.append(f"posterior_left_L_{L:g}")
        data.append(post.values())
    rows = [[y, *col] for y, *col in zip(ys, *data)]
    return cols, rows, {"figure": "fig2", "params": {k: v for k, v in p.items()}}


def fig3(panel="a", mc=None):
    from .rnt import RnTParams, rnt_joint
    p = RnTParams(**FIG3)
    xs = x_grid(p.L)
    if panel in ("a", "b"):
        y1 = -1 if panel == "a" else 1
        tag = "minus" if y1 == -1 else "plus"
        plus = rnt_joint(p, xs, 1, LEFT, y1)
        minus = rnt_joint(p, xs, -1, LEFT, y1)
        cols = ["x0", f"pi_{tag}_from_plus", f"pi_{tag}_from_minus", f"pi_{tag}_from_mixed"]
    else:
        plus = rnt_joint(p, xs, 1, LEFT, -1) + rnt_joint(p, xs, 1, LEFT, 1)
        minus = rnt_joint(p, xs, -1, LEFT, -1) + rnt_joint(p, xs, -1, LEFT, 1)
        cols = ["x0", "pi_sum_from_plus", "pi_sum_from_minus", "pi_sum_from_mixed"]
    rows = [[x, a, b, 0.5 * (a + b)] for x, a, b in zip(xs, plus, minus)]
    meta = {"figure": f"fig3{panel}", "params": FIG3}
    if mc is not None:
        cols, rows = _overlay(cols, rows, xs, mc, lambda x, cfg: _mc_fig3(x, cfg, panel))
    return cols, rows, meta


def _mc_fig3(x, cfg, panel):
    from .mc import simulate_rnt
    from .rnt import RnTParams
    p = RnTParams(**FIG3)
    out = []
    for y0, tag in ((1, "plus"), (-1, "minus")):
        est = simulate_rnt(p, x, y0, cfg)
        if panel == "c":
            v, se = est.marginal(LEFT), est.marginal_err(LEFT)
        else:
            y1 = -1 if panel == "a" else 1
            v, se = est.p_hat(LEFT, y1), est.std_err(LEFT, y1)
        out.append((f"mc_from_{tag}", v, se))
    return out


def fig4(panel="a", mc=None):
    from .rnt import RnTParams, rnt_asymptote, rnt_conditional
    if panel == "a":
        Ls = np.geomspace(1e-2, 1e2, 81)
        cols, data = ["L"], []
        for Pe in FIG4_PE:
            for style, (nu, al, D) in fig4_triples(Pe).items():
                cols.append(f"cond_minus_given_left_Pe_{Pe:g}_{style}")
                data.append([rnt_conditional(RnTParams(nu, al, D, L), 0.0, None, LEFT, -1) for L in Ls])
        rows = [[L, *c] for L, *c in zip(Ls, *data)]
        meta = {"figure": "fig4a", "x0": 0.0, "prior": "symmetric",
                "triples": {f"{Pe:g}": fig4_triples(Pe) for Pe in FIG4_PE}}
        return cols, rows, meta
    Pes = np.geomspace(1e-2, 1e2, 20)
    rows = [[Pe, rnt_asymptote(Pe)] for Pe in Pes]
    return ["Pe", "asymptote"], rows, {"figure": "fig4b", "grid": "20 log-spaced points"}


def fig5(mc=None):
    from .ratchet import RatchetParams, ratchet_joint
    p = FIG5
    xs = x_grid(p["L"], 81)
    cols = ["h", "a", "x0", "pi_on_from_on", "pi_on_from_off", "pi_off_from_on", "pi_off_from_off"]
    rows = []
    for h in p["hs"]:
        for a in p["apexes"]:
            rp = RatchetParams(h, a, p["r"], p["D"], p["L"])
            for x in xs:
                rows.append([h, a, x] + [ratchet_joint(None, rp, x, y0, LEFT, y1)
                                         for y1 in (1, 0) for y0 in (1, 0)])
    meta = {"figure": "fig5", "params": {k: v for k, v in p.items()}}
    if mc is not None:
        from .mc import simulate_ratchet
        cols = cols + [f"mc_{c[3:]}" for c in cols[3:]] + [f"mc_se_{c[3:]}" for c in cols[3:]]
        marks = set(np.round(x_grid(p["L"], 9), 12))
        out = []
        for row in rows:
            h, a, x = row[:3]
            if round(x, 12) in marks:
                rp = RatchetParams(h, a, p["r"], p["D"], p["L"])
                ests = {y0: simulate_ratchet(rp, x, y0, mc) for y0 in (1, 0)}
                vals = [ests[y0].p_hat(LEFT, y1) for y1 in (1, 0) for y0 in (1, 0)]
                ses = [ests[y0].std_err(LEFT, y1) for y1 in (1, 0) for y0 in (1, 0)]
                out.append(row + vals + ses)
            else:
                out.append(row + [math.nan] * 8)
        rows = out
    return cols, rows, meta


def fig6(mc=None):
    from .ratchet import RatchetParams, ratchet_conditional
    p = FIG5
    hs = np.linspace(-3, 3, 61)
    cols = ["h"] + [f"cond_on_given_left_a_{a:g}" for a in p["apexes"]]
    rows = [[h] + [ratchet_conditional(RatchetParams(h, a, p["r"], p["D"], p["L"]), 0.0, None, LEFT, 1)
                   for a in p["apexes"]] for h in hs]
    return cols, rows, {"figure": "fig6", "x0": 0.0, "prior": "symmetric", "params": p}


def fig7(mc=None):
    from .resetting import Delta, ResetParams, p_reset, pi0, piR
    p = FIG7
    rp = ResetParams(p["D"], p["r"], p["L"], Delta(p["x_r"]))
    xs = x_grid(p["L"])
    cols = ["x0", "pi0_left", "pi0_right", "piR_left", "piR_right", "p_reset"]
    rows = [[x, pi0(rp, x, LEFT), pi0(rp, x, RIGHT), piR(rp, x, LEFT), piR(rp, x, RIGHT), p_reset(rp, x)]
            for x in xs]
    meta = {"figure": "fig7", "params": p}
    if mc is not None:
        cols, rows = _overlay(cols, rows, xs, mc, _mc_fig7)
    return cols, rows, meta


def _mc_fig7(x, cfg):
    from .mc import simulate_resetting
    from .resetting import Delta, ResetParams
    p = FIG7
    est = simulate_resetting(ResetParams(p["D"], p["r"], p["L"], Delta(p["x_r"])), x, cfg)
    out = []
    for s in (LEFT, RIGHT):
        out.append((f"mc_pi0_{s.label}", est.p_hat(s, 0), est.std_err(s, 0)))
        n = est.n_trials
        pr = (sum(c for (ss, o), c in est.counts.items() if ss == s and o != 0)) / n
        out.append((f"mc_piR_{s.label}", pr, math.sqrt(pr * (1 - pr) / n)))
    return out


def fig8(panel="a", mc=None):
    from .resetting import Delta, ResetParams, alpha_star, reset_conditional
    p = FIG8
    dist = Delta(p["x_r"])
    if panel == "a":
        ns = np.arange(0, 21)
        cols = ["n"] + [f"cond_n_given_left_alpha_{a:g}" for a in p["alphas"]]
        rows = [[int(n)] + [reset_conditional(ResetParams(p["D"], p["D"] * a * a, p["L"], dist),
                                              p["x0"], LEFT, int(n)) for a in p["alphas"]] for n in ns]
        return cols, rows, {"figure": "fig8a", "params": p}
    alphas = np.geomspace(0.05, 5.0, 100)
    cols = ["alpha"] + [f"cond_n_{n}_given_left" for n in p["ns"]]
    rows = [[a] + [reset_conditional(ResetParams(p["D"], p["D"] * a * a, p["L"], dist), p["x0"], LEFT, n)
                   for n in p["ns"]] for a in alphas]
    stars = {str(n): alpha_star(n, p["L"], p["x0"], dist, LEFT, p["D"]) for n in p["ns"]}
    return cols, rows, {"figure": "fig8b", "params": p, "alpha_star": stars}


# ---------------------------------------------------------------------------
# MC overlay helper
# ---------------------------------------------------------------------------

def _overlay(cols, rows, xs, cfg, fn, n_markers=MARKERS):
    """Append ``(value, std_err)`` columns from ``fn(x, cfg)`` at marker positions."""
    idx = set(np.linspace(0, len(xs) - 1, n_markers).round().astype(int).tolist())
    extra_cols = None
    new_rows = []
    for i, row in enumerate(rows):
        if i in idx:
            res = fn(float(xs[i]), cfg)
            if extra_cols is None:
                extra_cols = [c for name, _, _ in res for c in (name, name + "_se")]
            new_rows.append((row, [v for _, val, se in res for v in (val, se)]))
        else:
            new_rows.append((row, None))
    width = len(extra_cols)
    out = [row + (vals if vals is not None else [math.nan] * width) for row, vals in new_rows]
    return cols + extra_cols, out


FIGURES = {
    "fig1a": lambda mc=None: fig1("a", mc),
    "fig1b": lambda mc=None: fig1("b", mc),
    "fig2": fig2,
    "fig3a": lambda mc=None: fig3("a", mc),
    "fig3b": lambda mc=None: fig3("b", mc),
    "fig3c": lambda mc=None: fig3("c", mc),
    "fig4a": lambda mc=None: fig4("a", mc),
    "fig4b": lambda mc=None: fig4("b", mc),
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8a": lambda mc=None: fig8("a", mc),
    "fig8b": lambda mc=None: fig8("b", mc),
}

HAS_MARKERS = ("fig1a", "fig3a", "fig3b", "fig3c", "fig5", "fig7")


def figure(fig_id: str, mc=None):
    try:
        fn = FIGURES[fig_id]
    except KeyError:
        raise UnknownFigure(f"unknown figure {fig_id!r}; choose from {', '.join(FIGURES)}") from None
    return fn(mc=mc if fig_id in HAS_MARKERS else None)
