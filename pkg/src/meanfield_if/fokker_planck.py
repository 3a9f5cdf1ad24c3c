"""Killed Fokker-Planck solver, the map Gamma, and the self-consistent nonlinear solve.

The density p(t, y) lives on nodes y_min = y_0 < ... < y_M = 1 with Dirichlet
zeros at both ends. The coupling drift alpha e'(t) is applied as an exact shift
of the profile by alpha times the firing increment of each step, which keeps the
scheme stable for arbitrarily large firing rates (including blow-up).

Firing curves produced here use exact mass accounting: values are cumulative
exited mass, derivs are per-step exit rates (the first entry is the stencil rate
at t = 0). The stencil rate -1/2 d_y p(t,1) is kept separately as ``flux``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, StabilityError
from .model import FiringCurve, InitialLaw, ModelConfig, _raw_drift

COUPLINGS = {"prescribed": K.PRESCRIBED, "lagged": K.LAGGED, "sweeps": K.SWEEPS,
             "cascade": K.CASCADE}
DEFAULT_DY = 5e-3
DEFAULT_COURANT = 0.5
LEAK_TOL = 1e-6


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform nodes on [y_min, 1] (0 and 1 are nodes) and steps on [0, T]."""

    y_min: float
    dy: float
    dt: float
    T: float

    def __post_init__(self):
        if not (self.dy > 0 and self.dt > 0 and self.T > 0):
            raise ConfigError("grid spacings and horizon must be positive")
        inv = 1.0 / self.dy
        if abs(inv - round(inv)) > 1e-6:
            raise ConfigError(f"1/dy must be an integer so that 0 and 1 are nodes (dy={self.dy})")
        k = -self.y_min / self.dy
        if self.y_min >= 0 or abs(k - round(k)) > 1e-6:
            raise ConfigError("y_min must be a negative multiple of dy")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ConfigError("T must be an integer multiple of dt")

    @property
    def M(self) -> int:
        return int(round((1.0 - self.y_min) / self.dy))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def j_reset(self) -> int:
        return int(round(-self.y_min / self.dy))

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.M + 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def max_explicit_dt(self, max_drift: float) -> float:
        return self.dy ** 2 / (1.0 + self.dy * max_drift)

    def with_T(self, T: float) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.y_min, self.dy, self.dt, T)

    def with_ymin(self, y_min: float) -> "SpaceTimeGrid":
        return SpaceTimeGrid(y_min, self.dy, self.dt, self.T)

    def halved(self) -> "SpaceTimeGrid":
        """Grid with dy/2 and dt/4 (same diffusive Courant number)."""
        return SpaceTimeGrid(self.y_min, self.dy / 2, self.dt / 4, self.T)


def default_ymin(init: InitialLaw, T: float) -> float:
    return min(init.leftmost(), 0.0) - max(6.0 * math.sqrt(T), 4.0)


def default_grid(cfg: ModelConfig, dy: float = DEFAULT_DY, dt: float | None = None,
                 ymin: float | None = None, T: float | None = None,
                 courant: float = DEFAULT_COURANT) -> SpaceTimeGrid:
    """Grid for ``cfg``; ``dt`` defaults to ``courant`` times the explicit stability limit."""
    T = cfg.T if T is None else T
    y0 = default_ymin(cfg.init, T) if ymin is None else ymin
    y0 = -math.ceil(-y0 / dy - 1e-9) * dy
    if dt is None:
        bmax = max_drift(cfg, y0)
        dt = courant * dy * dy / (1.0 + dy * bmax)
    n = max(1, math.ceil(T / dt - 1e-9))
    return SpaceTimeGrid(y0, dy, T / n, T)


def max_drift(cfg: ModelConfig, y_min: float) -> float:
    y = np.linspace(y_min, 1.0, 4001)
    return float(np.abs(_raw_drift(cfg.drift, y)).max())


@dataclass(frozen=True)
class SchemeOptions:
    """Numerical choices of the solver.

    theta : implicitness of the diffusion (0 = explicit, the default).
    flux_order : 2 for the one-sided second-order boundary stencil, 1 for the fallback.
    coupling : "cascade" (exact intra-step cascade), "sweeps" (fixed-point sweeps
        from the lagged value), or "lagged" (previous step's increment).
    blowup_cap : exit-rate threshold; default 10 / sqrt(dt).
    blowup_fraction : per-step fired mass that signals blow-up.
    """

    theta: float = 0.0
    flux_order: int = 2
    coupling: str = "cascade"
    max_sweeps: int = 5
    step_tol: float = 1e-8
    blowup_cap: float | None = None
    blowup_fraction: float = 0.5
    n_snapshots: int = 200
    snapshot_times: tuple | None = None
    leak_tol: float = LEAK_TOL
    auto_extend: bool = True

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ConfigError("theta must lie in [0, 1]")
        if self.flux_order not in (1, 2):
            raise ConfigError("flux_order must be 1 or 2")
        if self.coupling not in ("cascade", "sweeps", "lagged"):
            raise ConfigError(f"unknown coupling {self.coupling!r}")


@dataclass(frozen=True)
class DensityField:
    """Solution of one Fokker-Planck solve.

    ``snapshots[i]`` holds p at ``snap_times[i]``; ``final`` holds p at T.
    ``flux`` (n_steps + 1) is the stencil firing rate; ``exits`` and ``leaks``
    (n_steps) are the masses lost through y = 1 and y_min in each step.
    """

    grid: SpaceTimeGrid
    mode: str
    snap_times: np.ndarray
    snapshots: np.ndarray
    final: np.ndarray
    flux: np.ndarray
    exits: np.ndarray
    leaks: np.ndarray
    shifts: np.ndarray
    init_mass: float
    notes: tuple = field(default_factory=tuple)

    @property
    def y(self) -> np.ndarray:
        return self.grid.y

    @property
    def leak(self) -> np.ndarray:
        """Cumulative mass lost at y_min, on the time grid."""
        return np.concatenate([[0.0], np.cumsum(self.leaks)])

    @property
    def fired(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.exits)])

    def mass(self, p: np.ndarray) -> float:
        return float(p.sum() * self.grid.dy)

    def mass_defect(self) -> float:
        """Largest violation of the mass balance at the snapshot times."""
        idx = np.rint(self.snap_times / self.grid.dt).astype(int)
        out = 0.0
        for i, k in enumerate(idx):
            bal = self.mass(self.snapshots[i]) + self.leak[k]
            if self.mode == "killed":
                bal += self.fired[k]
            out = max(out, abs(bal - self.init_mass))
        return out

    def killed_mass(self) -> float:
        """1 - remaining mass at T (killed mode: fired + leaked)."""
        return self.init_mass - self.mass(self.final)

    def snapshot_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.snap_times - t)))
        if abs(self.snap_times[i] - t) > 0.5 * self.grid.dt + 1e-12:
            raise ValueError(f"no snapshot stored at t={t}")
        return self.snapshots[i]

    def to_law(self, epsilon: float | None = None) -> InitialLaw:
        """Terminal density as a normalised initial law for a restart."""
        return InitialLaw.gridded(self.grid.y, self.final, epsilon=epsilon, normalize=True)


def discretize_init(init: InitialLaw, grid: SpaceTimeGrid) -> np.ndarray:
    """Nodal density of ``init``; a point mass is split linearly between neighbours."""
    M = grid.M
    p = np.zeros(M + 1)
    if init.kind == "dirac":
        c = (init.x0 - grid.y_min) / grid.dy
        j = int(math.floor(c + 1e-12))
        w = c - j
        if j < 1 or j + (w > 1e-12) > M - 1:
            raise ConfigError("initial point must lie strictly inside (y_min, 1)")
        p[j] += (1 - w) / grid.dy
        if w > 1e-12:
            p[j + 1] += w / grid.dy
        return p
    if init.y[0] < grid.y_min - 1e-12 and np.any(init.density[init.y < grid.y_min] > 0):
        raise ConfigError("initial density extends below y_min")
    p = np.interp(grid.y, init.y, init.density, left=0.0, right=0.0)
    p[0] = p[M] = 0.0
    got = p.sum() * grid.dy
    if abs(got - init.mass) > 1e-8:
        raise ConfigError(f"initial law loses mass on this grid ({got!r} vs {init.mass!r})")
    return p * (init.mass / got)


def _snap_steps(grid: SpaceTimeGrid, opts: SchemeOptions) -> np.ndarray:
    n = grid.n_steps
    if opts.snapshot_times is not None:
        steps = np.rint(np.asarray(opts.snapshot_times, float) / grid.dt).astype(np.int64)
        if np.any(steps < 0) or np.any(steps > n):
            raise ConfigError("snapshot times must lie in [0, T]")
    else:
        steps = np.rint(np.linspace(0, n, min(n, opts.n_snapshots) + 1)).astype(np.int64)
    return np.unique(steps)


def _check_stability(cfg: ModelConfig, grid: SpaceTimeGrid, opts: SchemeOptions) -> np.ndarray:
    y = grid.y
    faces = 0.5 * (y[1:] + y[:-1])
    bface = np.asarray(_raw_drift(cfg.drift, faces), float)
    bmax = float(np.abs(bface).max()) if bface.size else 0.0
    if opts.theta == 0.0:
        lim = grid.max_explicit_dt(bmax)
        if grid.dt > lim * (1 + 1e-9):
            raise StabilityError(f"explicit scheme needs dt <= {lim:.3e}, got {grid.dt:.3e}")
    elif grid.dt * bmax > grid.dy * (1 + 1e-9):
        raise StabilityError("transport CFL condition dt * max|b| <= dy violated")
    return bface


def _run(cfg, init, grid, opts, coupling, reinject, shifts, alpha):
    bface = _check_stability(cfg, grid, opts)
    p = discretize_init(init, grid)
    init_mass = float(p.sum() * grid.dy)
    n = grid.n_steps
    steps = _snap_steps(grid, opts)
    snaps = np.zeros((steps.size, grid.M + 1))
    exits = np.zeros(n)
    leaks = np.zeros(n)
    flux = np.zeros(n + 1)
    shift_out = np.zeros(n)
    K.evolve(p, grid.dy, grid.dt, n, float(opts.theta), bface, grid.j_reset, bool(reinject),
             int(coupling), float(alpha), np.ascontiguousarray(shifts, dtype=float),
             int(opts.max_sweeps), float(opts.step_tol), int(opts.flux_order), steps, snaps,
             exits, leaks, flux, shift_out)
    return DensityField(grid, "reinject" if reinject else "killed", steps * grid.dt, snaps,
                        p, flux, exits, leaks, shift_out, init_mass)


def _solve_with_extension(cfg, init, grid, opts, coupling, reinject, shifts, alpha,
                          auto_ymin: bool):
    field_ = _run(cfg, init, grid, opts, coupling, reinject, shifts, alpha)
    tries = 0
    while field_.leak[-1] > opts.leak_tol and auto_ymin and opts.auto_extend and tries < 3:
        grid = grid.with_ymin(2.0 * grid.y_min)
        field_ = _run(cfg, init, grid, opts, coupling, reinject, shifts, alpha)
        tries += 1
    if field_.leak[-1] > opts.leak_tol:
        field_ = _with_note(field_, f"leak {field_.leak[-1]:.2e} at y_min exceeds {opts.leak_tol}")
    return field_


def _with_note(f: DensityField, note: str) -> DensityField:
    return DensityField(f.grid, f.mode, f.snap_times, f.snapshots, f.final, f.flux, f.exits,
                        f.leaks, f.shifts, f.init_mass, f.notes + (note,))


def _resolve_grid(cfg, grid):
    if grid is None:
        return default_grid(cfg), True
    return grid, False


def _prescribed_shifts(cfg: ModelConfig, e: FiringCurve, grid: SpaceTimeGrid) -> np.ndarray:
    if e.n != grid.n_steps or abs(e.dt - grid.dt) > 1e-9 * grid.dt:
        raise ConfigError("firing curve must live on the solver's time grid")
    return cfg.alpha * np.diff(e.values)


def curve_from_field(f: DensityField) -> FiringCurve:
    """Firing curve with exact cumulative exits and per-step exit rates."""
    g = f.grid
    vals = f.fired
    der = np.empty(g.n_steps + 1)
    der[0] = f.flux[0]
    der[1:] = f.exits / g.dt
    return FiringCurve(g.times, vals, der)


def solve_killed_fp(cfg: ModelConfig, e: FiringCurve, init: InitialLaw | None = None,
                    grid: SpaceTimeGrid | None = None,
                    opts: SchemeOptions = SchemeOptions()) -> DensityField:
    """Density of the process driven by alpha e'(t), killed at 1, no re-injection."""
    init = init or cfg.init
    grid, auto = _resolve_grid(cfg, grid)
    shifts = _prescribed_shifts(cfg, e, grid)
    return _solve_with_extension(cfg, init, grid, opts, K.PRESCRIBED, False, shifts,
                                 cfg.alpha, auto)


def gamma_field(cfg: ModelConfig, e: FiringCurve, init: InitialLaw | None = None,
                grid: SpaceTimeGrid | None = None,
                opts: SchemeOptions = SchemeOptions()) -> DensityField:
    """Full-law density of the process driven by alpha e'(t) with re-injection at 0."""
    init = init or cfg.init
    grid, auto = _resolve_grid(cfg, grid)
    shifts = _prescribed_shifts(cfg, e, grid)
    return _solve_with_extension(cfg, init, grid, opts, K.PRESCRIBED, True, shifts,
                                 cfg.alpha, auto)


def gamma_map(cfg: ModelConfig, e: FiringCurve, init: InitialLaw | None = None,
              grid: SpaceTimeGrid | None = None,
              opts: SchemeOptions = SchemeOptions()) -> FiringCurve:
    """Gamma(e): expected reset count of the diffusion driven by alpha e'(t)."""
    return curve_from_field(gamma_field(cfg, e, init, grid, opts))


def detect_blowup(f: DensityField, opts: SchemeOptions = SchemeOptions()) -> float | None:
    """First time whose step exit rate exceeds the cap or whose fired mass exceeds the fraction."""
    dt = f.grid.dt
    cap = opts.blowup_cap if opts.blowup_cap is not None else 10.0 / math.sqrt(dt)
    bad = np.nonzero((f.exits / dt > cap) | (f.exits > opts.blowup_fraction))[0]
    return float((bad[0] + 1) * dt) if bad.size else None


def solve_nonlinear_fp(cfg: ModelConfig, init: InitialLaw | None = None,
                       grid: SpaceTimeGrid | None = None,
                       opts: SchemeOptions = SchemeOptions()
                       ) -> tuple[FiringCurve, DensityField, float | None]:
    """Self-consistent solve: the firing increment of each step drives that step's shift."""
    init = init or cfg.init
    grid, auto = _resolve_grid(cfg, grid)
    shifts = np.zeros(grid.n_steps)
    f = _solve_with_extension(cfg, init, grid, opts, COUPLINGS[opts.coupling], True, shifts,
                              cfg.alpha, auto)
    return curve_from_field(f), f, detect_blowup(f, opts)
