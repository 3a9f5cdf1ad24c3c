import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from meanfield_if.oracles import (fpt_density, hitting_cdf_brownian, hitting_cdf_line,
                                  renewal_oracle, strip_survival, sup_above_inf_above)


def test_brownian_cdf_examples():
    assert hitting_cdf_brownian(0.8, 1.0) == pytest.approx(2 * norm.cdf(-0.2), abs=1e-12)
    assert hitting_cdf_brownian(0.8, 1.0) == pytest.approx(0.84148, abs=1e-5)
    assert hitting_cdf_brownian(0.8, 0.0) == 0.0
    assert hitting_cdf_brownian(0.8, 1e12) == pytest.approx(1.0, abs=1e-5)


def test_line_cdf_examples():
    assert hitting_cdf_line(0.2, 0.5, 1.0) == pytest.approx(0.9135, abs=1e-4)
    assert hitting_cdf_line(0.2, 0.5, 1e8) == pytest.approx(1.0, abs=1e-9)


def test_line_cdf_monte_carlo(rng):
    # Euler paths on a fine grid underestimate crossings slightly; the bridge fixes that
    n, paths, dt = 400, 100_000, 1.0 / 400
    w = np.zeros(paths)
    hit = np.zeros(paths, bool)
    for k in range(1, n + 1):
        prev = w.copy()
        w += math.sqrt(dt) * rng.standard_normal(paths)
        gap0 = 0.2 - 0.5 * (k - 1) * dt - prev
        gap1 = 0.2 - 0.5 * k * dt - w
        cross = (gap1 <= 0) | (rng.random(paths) < np.exp(-2 * np.maximum(gap0, 0)
                                                          * np.maximum(gap1, 0) / dt))
        hit |= cross
    p = hit.mean()
    se = math.sqrt(p * (1 - p) / paths)
    assert abs(p - hitting_cdf_line(0.2, 0.5, 1.0)) < 4 * se


@given(st.floats(0.01, 3), st.floats(0.01, 5))
def test_line_reduces_to_brownian(a, t):
    assert hitting_cdf_line(a, 0.0, t) == pytest.approx(hitting_cdf_brownian(1 - a, t), abs=1e-12)


@given(st.floats(-2, 0.99), st.floats(0.01, 4), st.floats(0.01, 4))
def test_brownian_cdf_monotone_in_time(x0, t1, t2):
    lo, hi = sorted((t1, t2))
    assert hitting_cdf_brownian(x0, lo) <= hitting_cdf_brownian(x0, hi) + 1e-15


def test_fpt_density():
    assert fpt_density(0.8, 0.04) == pytest.approx(6.05, abs=0.01)
    # density integrates to the CDF
    t = np.linspace(0, 1, 20001)
    assert np.trapezoid(fpt_density(0.8, t), t) == pytest.approx(hitting_cdf_brownian(0.8, 1),
                                                                 abs=1e-6)


def test_renewal_examples():
    e = renewal_oracle(0.8, 1.0, 1e-4)
    assert e.values[0] == 0.0
    assert e(0.04) == pytest.approx(0.3173, abs=1e-3)
    coarse = renewal_oracle(0.8, 1.0, 4e-4)
    assert abs(coarse(1.0) - e(1.0)) < 1e-3


def test_strip_probabilities():
    # image series against a discretely monitored Monte Carlo run
    rng = np.random.default_rng(1)
    n, paths = 1000, 40_000
    w = np.zeros(paths)
    lo = np.zeros(paths)
    hi = np.zeros(paths)
    for _ in range(n):
        w += math.sqrt(1 / n) * rng.standard_normal(paths)
        lo = np.minimum(lo, w)
        hi = np.maximum(hi, w)
    inside = np.mean((hi < 1.5) & (lo > -1.0))
    assert strip_survival(1.5, 1.0) == pytest.approx(inside, abs=0.02)
    p = sup_above_inf_above(2.0, 1.0)
    assert 0 < p < 2 * norm.cdf(-2)
