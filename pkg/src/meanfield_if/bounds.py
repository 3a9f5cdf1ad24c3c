"""Explicit a-priori constants: stability envelope, Hoelder constants, alpha_0, barrier.

Every "largest value satisfying ..." constant is found by bisection to 1e-10.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .model import DriftSpec, ModelConfig
from .oracles import sup_above_inf_above

BISECT_TOL = 1e-10
# Value reported in the literature for x0 = 0.8, zero drift; kept for reference only.
ALPHA0_REFERENCE_X08 = 0.104
# prefactor of the density ceilings: 2^{3/2} exp(-1/2) c'^{3/2}
_CEIL = 2.0 ** 1.5 * math.exp(-0.5)


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


def g_bound(a: float, alpha: float, Lambda: float, T: float, t):
    """Stability envelope (a + (4 + Lambda sqrt(T)) sqrt(t)) / (1-alpha) * exp(2 Lambda t / (1-alpha))."""
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    out = (a + (4.0 + Lambda * math.sqrt(T)) * np.sqrt(t)) / (1 - alpha) \
        * np.exp(2 * Lambda * t / (1 - alpha))
    return float(out) if out.ndim == 0 else out


def B_bound(T: float, alpha: float, Lambda: float, ex0plus: float) -> float:
    """Bound on E(M_T): (E[X0_+] + 4 sqrt(T) + Lambda T)/(1-alpha) * exp(2 Lambda T/(1-alpha))."""
    _check_alpha(alpha)
    return (ex0plus + 4 * math.sqrt(T) + Lambda * T) / (1 - alpha) \
        * math.exp(2 * Lambda * T / (1 - alpha))


def _largest(pred, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Largest x in [lo, hi] with pred(x), assuming pred(lo) and monotone feasibility."""
    if pred(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def compute_T0(epsilon: float, Lambda: float) -> float:
    """Largest T0 <= 1 with (1-eps) e^{Lambda T0} <= 1 - 7eps/8 and Lambda T0 e^{Lambda T0} <= eps/8."""
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0, 1)")

    def ok(T):
        g = math.exp(Lambda * T)
        return (1 - epsilon) * g <= 1 - 7 * epsilon / 8 and Lambda * T * g <= epsilon / 8

    return _largest(ok, 0.0, 1.0)


def density_ceilings(epsilon: float, Lambda: float, c_prime: float, alpha: float,
                     ex0plus: float) -> tuple[float, float]:
    """Uniform density ceilings (t <= T0, t > T0) evaluated at coupling ``alpha``."""
    T0 = compute_T0(epsilon, Lambda)
    B = B_bound(T0, alpha, Lambda, ex0plus)
    w = _CEIL * c_prime ** 1.5
    return w * (1 / epsilon + B), c_prime / math.sqrt(T0) + w * B


def compute_alpha0(epsilon: float, Lambda: float, K: float, c_prime: float,
                   ex0plus: float) -> float:
    """Largest alpha for which the three small-coupling inequalities hold.

    ``K`` only enters through ``c_prime``; it is accepted for signature symmetry.
    """
    if c_prime <= 0:
        raise ValueError("c_prime must be positive")
    T0 = compute_T0(epsilon, Lambda)
    w = _CEIL * c_prime ** 1.5

    def ok(a):
        if a >= 1.0:
            return False
        B = B_bound(T0, a, Lambda, ex0plus)
        return (a * B <= epsilon / 4
                and a * w * (1 / epsilon + B) <= 1
                and a * (c_prime / math.sqrt(T0) + w * B) <= 1)

    a0 = _largest(ok, 0.0, 1.0)
    if a0 <= 0:
        raise ValueError("no positive alpha satisfies the inequalities")
    return a0


def holder_B0(c: float, alpha: float, Lambda: float, epsilon: float) -> float:
    """Local Hoelder constant given a density ceiling ``c`` near the threshold."""
    if c * alpha >= 1:
        raise ValueError(f"bound is void: c * alpha = {c * alpha:.4g} >= 1")
    return math.exp(2 * Lambda) * ((8 + 5 * c + 8 / epsilon) * Lambda
                                   + 4 * (2 + c + 1 / epsilon)) / (1 - c * alpha)


def holder_constant(c: float, alpha: float, Lambda: float, epsilon: float) -> float:
    """Global Hoelder constant: B0 at window eps/4 times e^{2 Lambda}."""
    return holder_B0(c, alpha, Lambda, epsilon / 4) * math.exp(2 * Lambda)


def barrier_params(m, alpha, C_T, K, mu, eta, n) -> tuple[float, float]:
    """(gamma, Theta) of the barrier q(t,y) = Theta e^{Kt} [1 - e^{gamma (y-1)}]."""
    gamma = 2 * (max(m, 1.0) + alpha * C_T)
    theta = mu * n ** (-eta) / (-math.expm1(-gamma / n))
    return gamma, theta


def gradient_bound(n, mu, eta, m, alpha, C_T, K, t) -> float:
    """Bound on |d_y p(t,1)|, equal to Theta gamma e^{Kt}."""
    s = max(m, 1.0) + alpha * C_T
    return 2 * mu * s * n ** (-eta) / (-math.expm1(-2 * s / n)) * math.exp(K * t)


def barrier_function(t, y, gamma: float, theta: float, K: float):
    return theta * np.exp(K * np.asarray(t)) * (-np.expm1(gamma * (np.asarray(y) - 1.0)))


def cdprime_exact(alpha: float, holderB: float) -> float:
    """P(sup_{[0,1]} W > 2 + alpha B, inf_{[0,1]} W > -1) by the image series."""
    return sup_above_inf_above(2.0 + alpha * holderB, 1.0)


def estimate_cdprime(alpha: float, holderB: float, samples: int = 200_000, seed: int = 0,
                     n_steps: int = 1000, chunk: int = 50_000) -> tuple[float, float]:
    """Monte Carlo (estimate, standard error) of the same probability.

    Crossings between grid points are sampled from the Brownian-bridge law, so
    the estimator has no monitoring bias.
    """
    if holderB < 0:
        raise ValueError("holderB must be >= 0")
    up = 2.0 + alpha * holderB
    rng = np.random.default_rng(seed)
    dt = 1.0 / n_steps
    sd = math.sqrt(dt)
    hits = 0
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        w = np.zeros(k)
        above = np.zeros(k, bool)
        alive = np.ones(k, bool)
        for _ in range(n_steps):
            w1 = w + sd * rng.standard_normal(k)
            u_up = rng.random(k)
            u_dn = rng.random(k)
            p_up = np.exp(-2 * np.maximum(up - w, 0) * np.maximum(up - w1, 0) / dt)
            p_dn = np.exp(-2 * np.maximum(w + 1, 0) * np.maximum(w1 + 1, 0) / dt)
            above |= u_up < p_up
            alive &= ~(u_dn < p_dn)
            w = w1
        hits += int(np.count_nonzero(above & alive))
        done += k
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)


def oscillation_exponent(c_dprime: float, alpha: float, holderB: float) -> float:
    """eta = -ln(1 - c'') / ln L with L = 3 + alpha B."""
    return -math.log1p(-c_dprime) / math.log(3.0 + alpha * holderB)


def ceiling_mu(ceiling: float, c_dprime: float, eta: float, epsilon: float) -> float:
    """mu such that p <= mu (1-y)^eta follows from a density ceiling: c/((1-c'') r0^eta)."""
    r0 = min(c_dprime, epsilon / 4)
    return ceiling / ((1 - c_dprime) * r0 ** eta)


def _gaussian_envelope_c(t: float, x: np.ndarray, dens: np.ndarray, c_max: float) -> float:
    """Smallest c in [2, c_max] with c t^{-1/2} exp(-x^2/(c t)) >= dens at every x."""
    def covers(c):
        return np.all(c / math.sqrt(t) * np.exp(-x * x / (c * t)) >= dens)

    if covers(2.0):
        return 2.0
    if not covers(c_max):
        return math.inf
    lo, hi = 2.0, c_max
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if covers(mid) else (mid, hi)
    return hi


def cprime_linear_exact(kappa: float, c_max: float = 1e3) -> float:
    """Envelope constant for F(x) = kappa x, whose law is N(0, (e^{2 kappa t}-1)/(2 kappa)).

    Checked on a fine (t, x) grid; serves as an independent check of the Monte Carlo fit.
    """
    best = 2.0
    for t in np.linspace(0.01, 1.0, 100):
        v = t if kappa == 0 else math.expm1(2 * kappa * t) / (2 * kappa)
        x = np.linspace(-12, 12, 2401) * math.sqrt(max(v, t))
        dens = np.exp(-x * x / (2 * v)) / math.sqrt(2 * math.pi * v)
        best = max(best, _gaussian_envelope_c(t, x, dens, c_max))
    return best


def estimate_cprime(spec: DriftSpec, samples: int = 200_000, seed: int | None = None,
                    n_steps: int = 400, safety: float = 1.2, min_count: int = 100,
                    c_max: float = 1e3) -> float:
    """Gaussian-envelope constant c' for diffusions with K-Lipschitz drift vanishing at 0.

    Zero Lipschitz constant gives exactly 2. Otherwise Euler paths are simulated
    for the extreme families F(x) = +-K x and the saturated drifts
    +-K sign(x) min(|x|, r), and the smallest c' >= 2 whose envelope covers all
    histogram densities on t in (0, 1] is inflated by ``safety``. Histograms only
    resolve the bulk, so each checkpoint also requires coverage of the Gaussian
    with the empirical second moment, which controls the tails.
    """
    if spec.K == 0.0:
        return 2.0
    if seed is None:
        raise ConfigError("estimate_cprime needs an explicit seed")
    K = spec.K
    families = [lambda x: K * x, lambda x: -K * x]
    for r in (0.5, 1.0):
        families.append(lambda x, r=r: K * np.sign(x) * np.minimum(np.abs(x), r))
        families.append(lambda x, r=r: -K * np.sign(x) * np.minimum(np.abs(x), r))
    checkpoints = {int(round(s * n_steps)) for s in (0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0)}
    dt = 1.0 / n_steps
    rng = np.random.default_rng(seed)
    worst = 2.0
    for F in families:
        u = np.zeros(samples)
        for k in range(1, n_steps + 1):
            u += F(u) * dt + math.sqrt(dt) * rng.standard_normal(samples)
            if k in checkpoints:
                t = k * dt
                width = 0.1 * math.sqrt(t)
                lim = np.abs(u).max() + width
                edges = np.arange(-lim, lim + width, width)
                counts, edges = np.histogram(u, bins=edges)
                keep = counts >= min_count
                x = 0.5 * (edges[1:] + edges[:-1])[keep]
                dens = counts[keep] / (samples * width)
                worst = max(worst, _gaussian_envelope_c(t, x, dens, c_max))
                # histograms cannot see the tails; cover the moment-matched Gaussian too
                v = float(np.mean(u * u))
                xg = np.linspace(-12, 12, 2401) * math.sqrt(max(v, t))
                gauss = np.exp(-xg * xg / (2 * v)) / math.sqrt(2 * math.pi * v)
                worst = max(worst, _gaussian_envelope_c(t, xg, gauss, c_max))
    if not math.isfinite(worst):
        raise ValueError(f"no c' <= {c_max} covers the simulated densities")
    return max(2.0, safety * worst)


@dataclass
class BoundsReport:
    """Evaluated constants for one model configuration at coupling ``alpha``."""

    alpha: float
    epsilon: float
    g_times: np.ndarray
    g_a: np.ndarray
    B: float
    T0: float
    alpha0: float
    density_ceiling: float
    B0: float
    holderB: float
    c_prime: float
    c_dprime: float
    eta: float
    mu: float
    C_T: float
    gamma: float
    Theta: float
    grad_bound: float
    n: int
    alpha0_reference: float = ALPHA0_REFERENCE_X08
    notes: list = field(default_factory=list)

    SCALARS = ("alpha", "epsilon", "B", "T0", "alpha0", "density_ceiling", "B0", "holderB",
               "c_prime", "c_dprime", "eta", "mu", "C_T", "gamma", "Theta", "grad_bound", "n",
               "alpha0_reference")

    def scalars(self) -> dict:
        d = {k: getattr(self, k) for k in self.SCALARS}
        d = {k: v.item() if isinstance(v, np.generic) else v for k, v in d.items()}
        d["g_a(T)"] = float(self.g_a[-1])
        return d

    def inputs_hash(self) -> str:
        key = repr(sorted((k, repr(v)) for k, v in self.scalars().items()
                          if k in ("alpha", "epsilon", "c_prime", "C_T")))
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def is_valid(self) -> bool:
        vals = [v for v in self.scalars().values()]
        return all(math.isfinite(v) and v > 0 for v in vals) and self.T0 <= 1 \
            and 0 < self.alpha0 <= 1

    def to_key_values(self) -> str:
        lines = [f"{k}={v!r}" for k, v in self.scalars().items()]
        lines += [f"note={n}" for n in self.notes]
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[tuple[str, float, str]]:
        h = self.inputs_hash()
        return [(k, v, h) for k, v in self.scalars().items()]


def bounds_report(cfg: ModelConfig, c_prime: float | None = None, C_T: float | None = None,
                  c_dprime: float | None = None, mu: float | None = None,
                  eta: float | None = None, seed: int | None = None,
                  cprime_samples: int = 200_000) -> BoundsReport:
    """Evaluate every constant for ``cfg``.

    ``C_T`` (a bound on e') defaults to the maximal firing rate of a direct
    nonlinear solve; ``c_dprime`` defaults to the exact image-series value; ``mu``
    defaults to the ceiling construction. Void constants are reported as inf/nan
    with an explanatory note.
    """
    notes = []
    drift = cfg.drift
    eps = min(cfg.epsilon, 1 - 1e-12)
    alpha = cfg.alpha
    ex0plus = cfg.init.positive_part_mean()
    if c_prime is None:
        c_prime = estimate_cprime(drift, samples=cprime_samples, seed=seed)
    T0 = compute_T0(eps, drift.Lambda)
    alpha0 = compute_alpha0(eps, drift.Lambda, drift.K, c_prime, ex0plus)
    notes.append(f"alpha0 from the stated inequalities is {alpha0:.6g}; the literature value "
                 f"{ALPHA0_REFERENCE_X08} (x0=0.8, zero drift) is not reproduced by them")
    if alpha >= alpha0:
        notes.append(f"alpha={alpha} is not below alpha0; small-coupling constants may be void")
    ceiling = max(density_ceilings(eps, drift.Lambda, c_prime, alpha, ex0plus))
    try:
        B0 = holder_B0(ceiling, alpha, drift.Lambda, eps)
        holderB = holder_constant(ceiling, alpha, drift.Lambda, eps)
    except ValueError as exc:
        B0 = holderB = math.inf
        notes.append(f"Hoelder constants void: {exc}")
    n = math.ceil(4 / eps - 1e-9)
    if C_T is None:
        C_T = _direct_solve_rate(cfg)
    if c_dprime is None:
        c_dprime = cdprime_exact(alpha, holderB) if math.isfinite(holderB) else math.nan
    if eta is None:
        eta = oscillation_exponent(c_dprime, alpha, holderB) if math.isfinite(holderB) \
            else math.nan
    if mu is None:
        mu = ceiling_mu(ceiling, c_dprime, eta, eps) if math.isfinite(eta) else math.nan
    gamma, Theta = barrier_params(drift.m, alpha, C_T, drift.K, mu, eta, n)
    grad = gradient_bound(n, mu, eta, drift.m, alpha, C_T, drift.K, cfg.T)
    tg = np.linspace(0.0, cfg.T, 101)
    return BoundsReport(alpha=alpha, epsilon=eps, g_times=tg,
                        g_a=g_bound(1.0, alpha, drift.Lambda, cfg.T, tg),
                        B=B_bound(cfg.T, alpha, drift.Lambda, ex0plus), T0=T0, alpha0=alpha0,
                        density_ceiling=ceiling, B0=B0, holderB=holderB, c_prime=c_prime,
                        c_dprime=c_dprime, eta=eta, mu=mu, C_T=C_T, gamma=gamma, Theta=Theta,
                        grad_bound=grad, n=n, notes=notes)


def _direct_solve_rate(cfg: ModelConfig) -> float:
    from .fokker_planck import default_grid, solve_nonlinear_fp
    from .fixed_point import lipschitz_estimate

    grid = default_grid(cfg, dy=0.01)
    curve, _, blowup = solve_nonlinear_fp(cfg, cfg.init, grid)
    if blowup is not None:
        return math.inf
    return lipschitz_estimate(curve)


def report_dict(rep: BoundsReport) -> dict:
    d = asdict(rep)
    d.pop("g_times")
    d.pop("g_a")
    return d
