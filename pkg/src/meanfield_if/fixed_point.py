"""Picard iteration of Gamma on short windows, chained to reach long horizons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import g_bound
from .errors import PicardError, RestartError
from .fokker_planck import (DensityField, SchemeOptions, SpaceTimeGrid, curve_from_field,
                            default_grid, gamma_field)
from .model import FiringCurve, InitialLaw, ModelConfig, concatenate_curves


def curve_norm(e1: FiringCurve, e2: FiringCurve) -> float:
    """sup|e1 - e2| + sup|e1' - e2'| on the shared grid."""
    return float(np.abs(e1.values - e2.values).max() + np.abs(e1.derivs - e2.derivs).max())


def lipschitz_estimate(e: FiringCurve) -> float:
    """Empirical bound on the firing rate: max_k e'_k."""
    return float(e.derivs.max())


@dataclass
class PicardDiagnostics:
    iterates: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    contraction_factors: list = field(default_factory=list)
    A1: float = math.nan
    T1: float = math.nan
    residual: float = math.nan
    halvings: int = 0
    envelope_ok: bool = True
    rate_bound_ok: bool = True
    field: DensityField | None = None

    def rows(self):
        """(iter, delta, factor) triples; factor is nan for the first iterate."""
        out = []
        for k, d in enumerate(self.deltas):
            f = self.contraction_factors[k - 1] if k >= 1 else math.nan
            out.append((k + 1, d, f))
        return out

    def longest_contracting_run(self, level: float = 0.5) -> int:
        best = run = 0
        for f in self.contraction_factors:
            run = run + 1 if f <= level else 0
            best = max(best, run)
        return best


def _align(T: float, dt: float) -> float:
    return max(1, int(math.floor(T / dt + 1e-9))) * dt


def envelope_guess(A1: float, alpha: float, Lambda: float, T1: float,
                   times: np.ndarray) -> FiringCurve:
    """Alternative starting point min(A1 t, g(t)) used to probe uniqueness."""
    g = g_bound(1.0, alpha, Lambda, T1, times)
    vals = np.minimum(A1 * times, g)
    der = np.where(A1 * times <= g, A1, np.gradient(g, times))
    return FiringCurve(times, vals, np.maximum(der, 0.0))


def picard_solve(cfg: ModelConfig, init: InitialLaw | None = None,
                 grid: SpaceTimeGrid | None = None, T1_hint: float = 1.0, tol: float = 1e-6,
                 max_iter: int = 60, opts: SchemeOptions = SchemeOptions(),
                 initial_guess=None, confirm: int = 3
                 ) -> tuple[FiringCurve, PicardDiagnostics]:
    """Fixed point of Gamma on [0, T1] by Picard iteration from e = 0.

    A1 = 2 sup_{t<=1} |Gamma(0)'| + 1. T1 starts at ``T1_hint`` and is halved
    whenever a contraction factor above 1/2 is seen before ``confirm``
    consecutive factors <= 1/2 have been observed. ``initial_guess`` is either
    None (e = 0) or a callable (A1, T1, times) -> FiringCurve.
    """
    init = init or cfg.init
    grid = grid or default_grid(cfg)
    dt = grid.dt
    g1 = grid.with_T(_align(min(1.0, grid.T), dt))
    gamma0 = curve_from_field(gamma_field(cfg, FiringCurve.zeros(g1.T, g1.n_steps), init, g1,
                                          opts))
    A1 = 2.0 * float(np.abs(gamma0.derivs).max()) + 1.0
    T1 = _align(min(T1_hint, grid.T), dt)
    halvings = 0
    while True:
        if T1 < 10 * dt:
            diag = PicardDiagnostics(A1=A1, T1=T1, halvings=halvings)
            raise PicardError(f"window length {T1:.3g} fell below 10 dt without contraction",
                              diag)
        gw = grid.with_T(T1)
        times = gw.times
        diag = PicardDiagnostics(A1=A1, T1=T1, halvings=halvings)
        if initial_guess is None:
            e = FiringCurve.zeros(T1, gw.n_steps)
        else:
            e = initial_guess(A1, T1, times)
        diag.iterates.append(e)
        env = g_bound(1.0, cfg.alpha, cfg.drift.Lambda, T1, times)
        confirmed = False
        restart = False
        converged = False
        for _ in range(max_iter):
            f = gamma_field(cfg, e, init, gw, opts)
            e_new = curve_from_field(f)
            d = curve_norm(e_new, e)
            if diag.deltas:
                prev = diag.deltas[-1]
                diag.contraction_factors.append(d / prev if prev > 0 else 0.0)
            diag.deltas.append(d)
            diag.iterates.append(e_new)
            diag.envelope_ok &= bool(np.all(e_new.values <= env + 1e-12))
            diag.rate_bound_ok &= bool(e_new.derivs.max() <= A1)
            e = e_new
            if d < tol:
                converged = True
                break
            fac = diag.contraction_factors
            if not confirmed and len(fac) >= confirm and all(x <= 0.5 for x in fac[-confirm:]):
                confirmed = True
            if not confirmed and fac and fac[-1] > 0.5:
                restart = True
                break
        if restart:
            T1 = _align(T1 / 2, dt)
            halvings += 1
            continue
        if not converged:
            raise PicardError(f"no convergence within {max_iter} iterations on T1={T1:.4g}",
                              diag)
        f = gamma_field(cfg, e, init, gw, opts)
        diag.residual = curve_norm(curve_from_field(f), e)
        diag.field = f
        return e, diag


@dataclass
class ChainDiagnostics:
    windows: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    restart_C: list = field(default_factory=list)
    junction_gaps: list = field(default_factory=list)
    junction_tol: float = math.nan
    fields: list = field(default_factory=list)


def linear_decay_constant(p: np.ndarray, y: np.ndarray, epsilon: float) -> float:
    """max p(y)/(1-y) over y in (1 - epsilon/8, 1)."""
    sel = (y > 1.0 - epsilon / 8) & (y < 1.0 - 1e-12)
    if not np.any(sel):
        return 0.0
    return float(np.max(p[sel] / (1.0 - y[sel])))


def chain_solve(cfg: ModelConfig, init: InitialLaw | None = None, T: float | None = None,
                grid: SpaceTimeGrid | None = None, T1_hint: float = 1.0, tol: float = 1e-6,
                max_iter: int = 60, opts: SchemeOptions = SchemeOptions(),
                keep_fields: bool = False
                ) -> tuple[FiringCurve, float | None, ChainDiagnostics]:
    """Solve on [0, T] by successive Picard windows restarted from the terminal density.

    Returns the concatenated curve, the time at which windows could no longer
    contract (None if T was reached), and per-window diagnostics.
    """
    init = init or cfg.init
    T = cfg.T if T is None else T
    grid = grid or default_grid(cfg, T=T)
    grid = grid.with_T(_align(T, grid.dt))
    chain = ChainDiagnostics(junction_tol=5 * (grid.dt + grid.dy))
    curve = None
    elapsed = 0
    n_total = grid.n_steps
    law = init
    hint = T1_hint
    while elapsed < n_total:
        remaining = (n_total - elapsed) * grid.dt
        wgrid = grid.with_T(remaining)
        try:
            e, diag = picard_solve(cfg, law, wgrid, min(hint, remaining), tol, max_iter, opts)
        except PicardError:
            blow = elapsed * grid.dt
            if curve is None:
                raise
            return curve, blow, chain
        chain.windows.append(diag)
        chain.starts.append(elapsed * grid.dt)
        if keep_fields:
            chain.fields.append(diag.field)
        if curve is None:
            curve = e
        else:
            chain.junction_gaps.append(abs(curve.derivs[-1] - e.derivs[0]))
            curve = concatenate_curves(curve, e)
        elapsed += e.n
        if elapsed >= n_total:
            break
        C = linear_decay_constant(diag.field.final, wgrid.y, cfg.epsilon)
        chain.restart_C.append(C)
        if not math.isfinite(C) or diag.field.final[-1] != 0.0:
            raise RestartError(f"terminal density at t={elapsed * grid.dt:.4g} lost linear decay")
        law = diag.field.to_law()
        hint = min(T1_hint, 2 * diag.T1)
    return curve, None, chain
