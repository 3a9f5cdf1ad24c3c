"""Closed-form and quadrature oracles for unit-noise Brownian motion and threshold 1."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .model import FiringCurve


def hitting_cdf_brownian(x0: float, t):
    """P(x0 + W hits 1 before t) = 2 Phi(-(1 - x0)/sqrt(t)) (reflection principle)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, 2.0 * ndtr(-(1.0 - x0) / np.sqrt(np.where(t > 0, t, 1.0))), 0.0)
    return float(out) if out.ndim == 0 else out


def hitting_cdf_line(a: float, b_slope: float, t):
    """P(W_s >= a - b_slope s for some s <= t), a > 0 (Bachelier-Levy formula)."""
    if a <= 0:
        raise ValueError("level a must be positive")
    t = np.asarray(t, dtype=float)
    st = np.sqrt(np.where(t > 0, t, 1.0))
    val = ndtr((b_slope * t - a) / st) + math.exp(2 * a * b_slope) * ndtr((-b_slope * t - a) / st)
    out = np.where(t > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def fpt_density(a: float, t):
    """Inverse-Gaussian density of the first passage time from a to 1."""
    t = np.asarray(t, dtype=float)
    d = 1.0 - a
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = d / np.sqrt(2 * np.pi * t ** 3) * np.exp(-d * d / (2 * t))
    out = np.where(t > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def renewal_oracle(x0: float, T: float, dt: float) -> FiringCurve:
    """Expected reset count of the uncoupled, driftless model started at x0.

    Solves e'(t) = f_{x0}(t) + int_0^t f_0(t - s) e'(s) ds with the trapezoidal
    rule (explicit because f_0(0) = 0) and integrates e' by trapezoids.
    """
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ValueError("T must be an integer multiple of dt")
    t = np.linspace(0.0, T, n + 1)
    fx = fpt_density(x0, t)
    f0 = fpt_density(0.0, t)
    ep = np.zeros(n + 1)
    ep[0] = fx[0]
    for i in range(1, n + 1):
        conv = np.dot(f0[i:0:-1], ep[:i]) - 0.5 * f0[i] * ep[0]
        ep[i] = fx[i] + dt * conv
    e = np.concatenate([[0.0], np.cumsum(0.5 * dt * (ep[1:] + ep[:-1]))])
    return FiringCurve(t, e, ep)


def strip_survival(a: float, b: float, t: float = 1.0, terms: int = 50) -> float:
    """P(-b < W_s < a for all s <= t) by the method of images."""
    st = math.sqrt(t)
    w = a + b
    k = np.arange(-terms, terms + 1)
    s = (ndtr((a + 2 * k * w) / st) - ndtr((-b + 2 * k * w) / st)
         - ndtr((-a + 2 * k * w) / st) + ndtr((-2 * a - b + 2 * k * w) / st))
    return float(s.sum())


def sup_above_inf_above(a: float, b: float, t: float = 1.0) -> float:
    """P(sup_{s<=t} W_s > a and inf_{s<=t} W_s > -b), a, b > 0."""
    stay_above = 2.0 * ndtr(b / math.sqrt(t)) - 1.0
    return max(stay_above - strip_survival(a, b, t), 0.0)
