"""Executable checks of the a-priori estimates on computed solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bounds import barrier_function, barrier_params, bounds_report
from .fixed_point import chain_solve, lipschitz_estimate
from .fokker_planck import (DensityField, SchemeOptions, SpaceTimeGrid, default_grid,
                            solve_killed_fp, solve_nonlinear_fp)
from .model import FiringCurve, ModelConfig


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check; ``worst_margin >= 0`` exactly when ``passed``."""

    name: str
    passed: bool
    worst_margin: float
    location: tuple
    details: str = ""
    value: float = math.nan

    def __post_init__(self):
        if self.passed != (self.worst_margin >= 0):
            raise ValueError(f"{self.name}: margin sign disagrees with the verdict")

    def row(self):
        loc = ";".join(f"{v:.6g}" for v in self.location)
        return (self.name, "pass" if self.passed else "fail", repr(float(self.worst_margin)), loc,
                repr(float(self.value)), self.details)


CSV_HEADER = ("name", "status", "worst_margin", "location", "value", "details")


@njit(cache=True)
def _holder_scan(v, times, B, hmax_steps):
    n = v.shape[0]
    rate = 0.0
    for i in range(n - 1):
        rate = max(rate, (v[i + 1] - v[i]) / (times[i + 1] - times[i]))
    span = v[n - 1] - v[0]
    worst = np.inf
    wi = 0
    wh = 0
    for h in range(1, min(hmax_steps, n - 1) + 1):
        dt = times[h] - times[0]
        # increments over lag h are at most min(rate * dt, span); skip lags that cannot win
        if B * math.sqrt(dt) - min(rate * dt, span) >= worst:
            continue
        for i in range(n - h):
            m = B * math.sqrt(times[i + h] - times[i]) - (v[i + h] - v[i])
            if m < worst:
                worst = m
                wi = i
                wh = h
    return worst, wi, wh


def check_holder(e: FiringCurve, B: float, epsilon: float, windowed: bool = True) -> CheckReport:
    """Check e(t0 + h) - e(t0) <= B sqrt(h) over grid pairs.

    With ``windowed`` only pairs with B sqrt(h) <= epsilon / 2 are examined; an
    empty window is a vacuous pass with infinite margin.
    """
    name = "holder" if windowed else "holder-all-pairs"
    dt = e.dt
    if windowed:
        if B <= 0:
            hmax = e.n
        elif not math.isfinite(B):
            hmax = 0
        else:
            hmax = int(math.floor((epsilon / (2 * B)) ** 2 / dt * (1 + 1e-12)))
    else:
        hmax = e.n
    hmax = min(hmax, e.n)
    if hmax < 1:
        return CheckReport(name, True, math.inf, (), "no grid pair inside the window", B)
    worst, i, h = _holder_scan(e.values, e.times, float(B), hmax)
    return CheckReport(name, bool(worst >= 0), float(worst), (e.times[i], h * dt),
                       f"pairs with h <= {hmax * dt:.3g}", B)


def check_density_decay(field: DensityField, epsilon: float, window=None,
                        tol: float = 1e-12) -> CheckReport:
    """C = max over stored times and y in (1 - eps/8, 1) of p(t,y)/(1-y); pass iff finite and p(t,1) = 0."""
    y = field.y
    sel = (y > 1.0 - epsilon / 8) & (y < 1.0 - 1e-12)
    times = field.snap_times
    rows = np.ones(times.size, bool)
    if window is not None:
        rows = (times >= window[0]) & (times <= window[1])
    P = field.snapshots[rows]
    if not np.any(sel) or P.size == 0:
        return CheckReport("density-decay", True, tol, (), "empty window", 0.0)
    ratio = P[:, sel] / (1.0 - y[sel])
    k, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    C = float(ratio[k, j])
    edge = float(np.abs(P[:, -1]).max())
    margin = tol - edge if math.isfinite(C) else -math.inf
    return CheckReport("density-decay", bool(margin >= 0), margin,
                       (times[rows][k], y[sel][j]), f"C={C:.6g}", C)


def check_barrier(field: DensityField, gamma: float, Theta: float, K: float, n: int,
                  num_tol: float | None = None) -> CheckReport:
    """Check p <= Theta e^{Kt}[1 - e^{gamma(y-1)}] + num_tol on y in [1 - 1/n, 1].

    The domination is only claimed when the initial mass avoids the strip and
    the left edge of the strip is dominated at all stored times; otherwise the
    report says "hypothesis-not-met".
    """
    g = field.grid
    if num_tol is None:
        num_tol = 10 * (g.dy ** 2 + g.dt) * Theta * gamma
    y = field.y
    edge = 1.0 - 1.0 / n
    sel = y >= edge - 1e-12
    t = field.snap_times
    P = field.snapshots
    if t[0] == 0.0 and np.any(P[0, sel] > 0):
        return CheckReport("barrier", False, -math.inf, (0.0,),
                           "hypothesis-not-met: initial mass inside the strip")
    p_edge = np.array([np.interp(edge, y, row) for row in P])
    q_edge = barrier_function(t, edge, gamma, Theta, K)
    hyp = q_edge + num_tol - p_edge
    if hyp.min() < 0:
        k = int(np.argmin(hyp))
        return CheckReport("barrier", False, float(hyp[k]), (t[k], edge), "hypothesis-not-met")
    q = barrier_function(t[:, None], y[None, sel], gamma, Theta, K)
    margin = q + num_tol - P[:, sel]
    k, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
    worst = float(margin[k, j])
    return CheckReport("barrier", bool(worst >= 0), worst, (t[k], y[sel][j]),
                       f"num_tol={num_tol:.3g}", Theta)


def compare_curves(e1: FiringCurve, e2: FiringCurve) -> tuple[float, float]:
    """(sup|e1 - e2|, sup|e1' - e2'|) on a shared grid."""
    if not e1.same_grid(e2):
        raise ValueError("curves live on different grids")
    return (float(np.abs(e1.values - e2.values).max()),
            float(np.abs(e1.derivs - e2.derivs).max()))


def fit_mu(field: DensityField, eta: float, epsilon: float) -> float:
    """Smallest mu with p(t,y) <= mu (1-y)^eta for stored t and y in [1 - eps/4, 1)."""
    y = field.y
    sel = (y >= 1.0 - epsilon / 4 - 1e-12) & (y < 1.0 - 1e-12)
    return float(np.max(field.snapshots[:, sel] / (1.0 - y[sel]) ** eta))


# Suites used by the command line and the acceptance run.

def holder_suite(cfg: ModelConfig, grid: SpaceTimeGrid | None = None, c_prime=None, seed=None):
    rep = bounds_report(cfg, c_prime=c_prime, C_T=0.0, seed=seed)
    curve, _, _ = solve_nonlinear_fp(cfg, grid=grid)
    return [check_holder(curve, rep.holderB, cfg.epsilon),
            check_holder(curve, rep.holderB, cfg.epsilon, windowed=False)]


def decay_suite(cfg: ModelConfig, grid: SpaceTimeGrid | None = None, rel_tol: float = 0.2):
    grid = grid or default_grid(cfg, dy=0.01)
    opts = SchemeOptions(snapshot_times=tuple(np.linspace(0, cfg.T, 401)))
    out = []
    Cs = []
    for g in (grid, grid.halved()):
        _, f, _ = solve_nonlinear_fp(cfg, grid=g, opts=opts)
        r = check_density_decay(f, cfg.epsilon)
        out.append(CheckReport(f"{r.name}(dy={g.dy:g})", r.passed, r.worst_margin, r.location,
                               r.details, r.value))
        Cs.append(r.value)
    rel = abs(Cs[1] - Cs[0]) / Cs[1]
    out.append(CheckReport("density-decay-grid-stability", rel <= rel_tol, rel_tol - rel, (),
                           f"C={Cs[0]:.6g} vs {Cs[1]:.6g}", rel))
    return out


def barrier_suite(cfg: ModelConfig, grid: SpaceTimeGrid | None = None, c_prime=None,
                  seed=None, probe_factor: float = 0.1):
    """Killed solve driven by e = 0 with fitted mu; includes the scaled-down falsifiability probe."""
    grid = grid or default_grid(cfg)
    e0 = FiringCurve.zeros(grid.T, grid.n_steps)
    f = solve_killed_fp(cfg, e0, grid=grid)
    rep = bounds_report(cfg, c_prime=c_prime, C_T=lipschitz_estimate(e0), seed=seed)
    mu = fit_mu(f, rep.eta, cfg.epsilon)
    gamma, Theta = barrier_params(cfg.drift.m, cfg.alpha, 0.0, cfg.drift.K, mu, rep.eta, rep.n)
    main = check_barrier(f, gamma, Theta, cfg.drift.K, rep.n)
    probe = check_barrier(f, gamma, probe_factor * Theta, cfg.drift.K, rep.n)
    probe = CheckReport("barrier-probe", probe.passed, probe.worst_margin, probe.location,
                        probe.details + f" (Theta x {probe_factor:g})", probe.value)
    return [main, probe]


def cross_suite(cfg: ModelConfig, grid: SpaceTimeGrid | None = None, tol: float = 1e-2):
    grid = grid or default_grid(cfg)
    chained, blow, _ = chain_solve(cfg, grid=grid)
    direct, _, _ = solve_nonlinear_fp(cfg, grid=grid)
    lagged, _, _ = solve_nonlinear_fp(cfg, grid=grid, opts=SchemeOptions(coupling="lagged"))
    out = []
    for name, other in (("cross-picard-direct", direct), ("cross-direct-lagged", lagged)):
        ref = chained if name == "cross-picard-direct" else direct
        if blow is not None:
            out.append(CheckReport(name, False, -math.inf, (blow,), "picard chain stopped"))
            continue
        d0, d1 = compare_curves(ref, other)
        worst = tol - max(d0, d1)
        out.append(CheckReport(name, worst >= 0, worst, (), f"sup|de|={d0:.3g} sup|de'|={d1:.3g}",
                               max(d0, d1)))
    return out


SUITES = {"holder": holder_suite, "decay": decay_suite, "barrier": barrier_suite,
          "cross": cross_suite}
