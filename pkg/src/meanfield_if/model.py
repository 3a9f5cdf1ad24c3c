"""Problem definition: drifts, initial laws, firing curves and the deterministic flow.

All internal computations use unit noise. A noise level ``sigma`` is absorbed at
construction by the time change ``u = sigma**2 * t``: the drift is divided by
``sigma**2`` and horizons are multiplied by it. The coupling ``alpha`` is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError

DRIFT_KINDS = ("zero", "linear", "tabulated")


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DriftSpec:
    """Lipschitz drift b on (-inf, 1] together with its structural constants.

    Attributes
    ----------
    kind : {"zero", "linear", "tabulated"}
    lam : float
        Mean-reversion rate for ``kind="linear"`` (b(x) = -lam * x).
    breakpoints, values : arrays
        Piecewise-linear table for ``kind="tabulated"``; constant beyond the ends.
    Lambda : float
        Linear-growth constant, |b(x)| <= Lambda (|x| + 1).
    K : float
        Lipschitz constant.
    m : float
        sup of |b| over [0, 1].
    """

    kind: str = "zero"
    lam: float = 0.0
    breakpoints: np.ndarray = field(default_factory=lambda: _frozen([]))
    values: np.ndarray = field(default_factory=lambda: _frozen([]))
    Lambda: float = 0.0
    K: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {self.kind!r}")
        for name in ("lam", "Lambda", "K", "m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"drift constant {name} must be finite and >= 0, got {v}")
        object.__setattr__(self, "breakpoints", _frozen(self.breakpoints))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.kind == "tabulated":
            xs, vs = self.breakpoints, self.values
            if xs.ndim != 1 or xs.size < 1 or xs.shape != vs.shape:
                raise ConfigError("tabulated drift needs matching 1-d breakpoints and values")
            if np.any(np.diff(xs) <= 0):
                raise ConfigError("tabulated breakpoints must be strictly increasing")
            violation = verify_drift_constants(self)
            if violation:
                raise ConfigError(f"tabulated drift constants are not valid: {violation}")

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls("zero")

    @classmethod
    def linear(cls, lam: float) -> "DriftSpec":
        lam = float(lam)
        return cls("linear", lam=lam, Lambda=lam, K=lam, m=lam)

    @classmethod
    def tabulated(cls, breakpoints, values, Lambda, K, m) -> "DriftSpec":
        return cls("tabulated", breakpoints=breakpoints, values=values,
                   Lambda=float(Lambda), K=float(K), m=float(m))

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "linear":
            return self.lam == 0.0
        return bool(np.all(self.values == 0.0))

    def __call__(self, x):
        return eval_drift(self, x)

    def scaled(self, factor: float) -> "DriftSpec":
        """Drift multiplied by ``factor`` (constants scale with it)."""
        f = float(factor)
        if self.kind == "zero" or f == 1.0:
            return self
        if self.kind == "linear":
            return DriftSpec.linear(self.lam * f)
        return DriftSpec.tabulated(self.breakpoints, self.values * f,
                                   self.Lambda * f, self.K * f, self.m * f)


def _raw_drift(spec: DriftSpec, x: np.ndarray) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros_like(x)
    if spec.kind == "linear":
        return -spec.lam * x
    return np.interp(x, spec.breakpoints, spec.values)


def eval_drift(spec: DriftSpec, x):
    """Evaluate b(x); raises DomainError for x > 1."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr > 1.0):
        raise DomainError("drift is only defined on (-inf, 1]")
    out = _raw_drift(spec, arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


def verify_drift_constants(spec: DriftSpec, lo: float = -10.0, n: int = 2001,
                           rtol: float = 1e-9) -> str:
    """Sample b on [lo, 1] and return a description of the first violated bound, or ''."""
    x = np.linspace(lo, 1.0, n)
    b = _raw_drift(spec, x)
    slack = rtol * (1.0 + np.abs(b))
    if np.any(np.abs(b) > spec.Lambda * (np.abs(x) + 1.0) + slack):
        return "linear growth (Lambda)"
    slopes = np.abs(np.diff(b)) / np.diff(x)
    if slopes.size and slopes.max() > spec.K * (1 + rtol) + rtol:
        return "Lipschitz (K)"
    inside = (x >= 0.0) & (x <= 1.0)
    if np.abs(b[inside]).max() > spec.m * (1 + rtol) + rtol:
        return "sup on [0,1] (m)"
    return ""


@dataclass(frozen=True)
class InitialLaw:
    """Law of the starting potential: a point mass or a gridded density.

    ``beta`` (optional) asserts density(x) <= beta (1 - x) on (1 - epsilon, 1].
    """

    kind: str
    x0: float = float("nan")
    y: np.ndarray = field(default_factory=lambda: _frozen([]))
    density: np.ndarray = field(default_factory=lambda: _frozen([]))
    beta: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind == "dirac":
            if not (self.x0 < 1.0):
                raise ConfigError(f"initial point must be < 1, got {self.x0}")
            return
        if self.kind != "gridded":
            raise ConfigError(f"unknown initial law kind {self.kind!r}")
        y, p = _frozen(self.y), _frozen(self.density)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "density", p)
        if y.ndim != 1 or y.shape != p.shape or y.size < 3:
            raise ConfigError("gridded density needs matching 1-d node and value arrays")
        if y[-1] > 1.0 + 1e-12:
            raise ConfigError("gridded density must be supported in (-inf, 1]")
        if np.any(p < 0):
            raise ConfigError("gridded density has negative values")
        mass = self.mass
        if abs(mass - 1.0) > 1e-10:
            raise ConfigError(f"gridded density has mass {mass!r}, expected 1")
        if self.beta is not None:
            eps = self.epsilon if self.epsilon is not None else 1.0
            near = y > 1.0 - eps
            if np.any(p[near] > self.beta * (1.0 - y[near]) + 1e-12):
                raise ConfigError("gridded density violates its linear-decay slope beta")

    @classmethod
    def dirac(cls, x0: float) -> "InitialLaw":
        return cls("dirac", x0=float(x0))

    @classmethod
    def gridded(cls, y, density, beta=None, epsilon=None, normalize=False) -> "InitialLaw":
        y = np.asarray(y, float)
        p = np.clip(np.asarray(density, float), 0.0, None)
        if normalize:
            p = p / np.trapezoid(p, y)
        return cls("gridded", y=y, density=p, beta=beta, epsilon=epsilon)

    @property
    def mass(self) -> float:
        if self.kind == "dirac":
            return 1.0
        return float(np.trapezoid(self.density, self.y))

    def positive_part_mean(self) -> float:
        """E[(X_0)_+]."""
        if self.kind == "dirac":
            return max(self.x0, 0.0)
        return float(np.trapezoid(np.maximum(self.y, 0.0) * self.density, self.y))

    def rightmost(self) -> float:
        if self.kind == "dirac":
            return self.x0
        nz = np.nonzero(self.density > 0)[0]
        return float(self.y[nz[-1]]) if nz.size else float(self.y[0])

    def leftmost(self) -> float:
        if self.kind == "dirac":
            return self.x0
        nz = np.nonzero(self.density > 0)[0]
        return float(self.y[nz[0]]) if nz.size else float(self.y[0])


@dataclass(frozen=True)
class ModelConfig:
    """One problem instance, stored in unit-noise (time-changed) units.

    Use :meth:`create` to build from physical parameters; it applies the time change.
    ``time_scale`` is sigma**2: internal time = time_scale * physical time.
    ``uncoupled=True`` admits alpha = 0 (the renewal benchmark); otherwise alpha
    must lie in (0, 1).
    """

    drift: DriftSpec
    alpha: float
    init: InitialLaw
    T: float
    epsilon: float
    time_scale: float = 1.0
    uncoupled: bool = False

    def __post_init__(self):
        lo_ok = self.alpha > 0.0 or (self.uncoupled and self.alpha == 0.0)
        if not (lo_ok and self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0,1), got {self.alpha}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigError(f"epsilon must lie in (0,1], got {self.epsilon}")
        if self.init.kind == "dirac" and self.init.x0 > 1.0 - self.epsilon + 1e-12:
            raise ConfigError("initial point must sit at or below 1 - epsilon")
        if not self.time_scale > 0:
            raise ConfigError("sigma must be positive")

    @classmethod
    def create(cls, drift: DriftSpec | None = None, alpha: float = 0.05,
               x0: float | InitialLaw = 0.8, T: float = 1.0, sigma: float = 1.0,
               epsilon: float | None = None) -> "ModelConfig":
        """Build a config from physical parameters; alpha = 0 gives an uncoupled config."""
        drift = drift or DriftSpec.zero()
        if not sigma > 0:
            raise ConfigError("sigma must be positive")
        init = x0 if isinstance(x0, InitialLaw) else InitialLaw.dirac(x0)
        if epsilon is None:
            epsilon = min(1.0, 1.0 - init.x0) if init.kind == "dirac" else 1.0
        scale = float(sigma) ** 2
        return cls(drift.scaled(1 / scale), float(alpha), init, float(T) * scale,
                   float(epsilon), scale, uncoupled=(alpha == 0.0))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.time_scale)

    @property
    def x0(self) -> float:
        return self.init.x0 if self.init.kind == "dirac" else float("nan")

    def with_alpha(self, alpha: float) -> "ModelConfig":
        return replace(self, alpha=float(alpha), uncoupled=(alpha == 0.0))

    def with_T(self, T_internal: float) -> "ModelConfig":
        return replace(self, T=float(T_internal))

    def with_init(self, init: InitialLaw) -> "ModelConfig":
        return replace(self, init=init)

    def to_physical_time(self, t):
        return np.asarray(t) / self.time_scale


@dataclass(frozen=True)
class FiringCurve:
    """e(t) = E(M_t) sampled on a uniform grid, with derivative samples.

    Invariants checked on construction: e_0 = 0, values nondecreasing, derivs >= 0.
    """

    times: np.ndarray
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        t, v, d = _frozen(self.times), _frozen(self.values), _frozen(self.derivs)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "derivs", d)
        if t.ndim != 1 or t.size < 2 or v.shape != t.shape or d.shape != t.shape:
            raise ValueError("times, values and derivs must be matching 1-d arrays (n >= 2)")
        if t[0] != 0.0:
            raise ValueError("firing curve grid must start at t = 0")
        steps = np.diff(t)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError("firing curve grid must be uniform and increasing")
        if v[0] != 0.0:
            raise ValueError("firing curve must start at e(0) = 0")
        scale = 1e-12 * max(1.0, float(np.abs(v).max()))
        if np.any(np.diff(v) < -scale):
            raise ValueError("firing curve must be nondecreasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("firing curve derivatives must be finite and >= 0")

    @classmethod
    def on_grid(cls, T: float, n: int, func, deriv) -> "FiringCurve":
        t = np.linspace(0.0, T, n + 1)
        return cls(t, np.asarray(func(t), float) * np.ones_like(t),
                   np.asarray(deriv(t), float) * np.ones_like(t))

    @classmethod
    def zeros(cls, T: float, n: int) -> "FiringCurve":
        t = np.linspace(0.0, T, n + 1)
        return cls(t, np.zeros_like(t), np.zeros_like(t))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n(self) -> int:
        return self.times.size - 1

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def trapezoid_defect(self) -> float:
        """max_i |e_{i+1} - e_i - (e'_i + e'_{i+1}) dt / 2| / dt**2."""
        dt = self.dt
        r = np.diff(self.values) - 0.5 * (self.derivs[1:] + self.derivs[:-1]) * dt
        return float(np.abs(r).max() / dt ** 2)

    def is_consistent(self, c: float) -> bool:
        return self.trapezoid_defect() <= c

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def truncate(self, n_steps: int) -> "FiringCurve":
        return FiringCurve(self.times[:n_steps + 1], self.values[:n_steps + 1],
                           self.derivs[:n_steps + 1])

    def same_grid(self, other: "FiringCurve") -> bool:
        return self.times.shape == other.times.shape and np.allclose(
            self.times, other.times, rtol=0, atol=1e-12 * max(1.0, self.T))


def grid_index(curve: FiringCurve, s: float) -> int:
    """Index of grid time ``s``; raises if ``s`` is not a grid node."""
    k = int(round(s / curve.dt))
    if k < 0 or k > curve.n or abs(curve.times[k] - s) > 1e-9 * max(curve.dt, 1.0):
        raise ValueError(f"shift {s} is not on the curve's time grid")
    return k


def shift_curve(e: FiringCurve, s: float) -> FiringCurve:
    """Re-based curve r -> e(s + r) - e(s) on [0, T - s]."""
    k = grid_index(e, s)
    if k == e.n:
        raise ValueError("shift leaves no time window")
    vals = e.values[k:] - e.values[k]
    return FiringCurve(e.times[: e.n + 1 - k].copy(), vals, e.derivs[k:])


def concatenate_curves(first: FiringCurve, second: FiringCurve) -> FiringCurve:
    """Glue ``second`` (restarted at time 0) after ``first``; the junction keeps ``first``'s derivative."""
    if abs(first.dt - second.dt) > 1e-12 * first.dt:
        raise ValueError("curves must share a time step")
    n1 = first.n
    t = np.concatenate([first.times, first.T + second.times[1:]])
    t = np.arange(t.size) * first.dt
    v = np.concatenate([first.values, first.values[-1] + second.values[1:]])
    d = np.concatenate([first.derivs, second.derivs[1:]])
    assert d.size == n1 + second.n + 1
    return FiringCurve(t, v, d)


def solve_flow(spec: DriftSpec, e: FiringCurve, alpha: float, x_init: float) -> np.ndarray:
    """Path of d(theta)/dt = b(theta) + alpha e'(t) on the curve's grid (classical RK4).

    Zero drift is integrated exactly: theta_t = x_init + alpha e(t). The path may
    leave (-inf, 1]; the drift is then extended by its own formula.
    """
    if x_init > 1.0:
        raise DomainError("initial point of the flow must be <= 1")
    if spec.is_zero:
        return x_init + alpha * e.values
    dt = e.dt
    d = e.derivs
    d_mid = 0.5 * (d[:-1] + d[1:])
    out = np.empty_like(e.values)
    x = float(x_init)
    out[0] = x
    f = lambda y: float(_raw_drift(spec, np.asarray(y)))
    for k in range(e.n):
        k1 = f(x) + alpha * d[k]
        k2 = f(x + 0.5 * dt * k1) + alpha * d_mid[k]
        k3 = f(x + 0.5 * dt * k2) + alpha * d_mid[k]
        k4 = f(x + dt * k3) + alpha * d[k + 1]
        x += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        out[k + 1] = x
    return out
