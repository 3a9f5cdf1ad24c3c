import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meanfield_if.bounds import (B_bound, barrier_function, barrier_params, bounds_report,
                                 cdprime_exact, compute_alpha0, compute_T0, cprime_linear_exact,
                                 density_ceilings, estimate_cdprime, estimate_cprime, g_bound,
                                 gradient_bound, holder_B0, oscillation_exponent)
from meanfield_if.errors import ConfigError
from meanfield_if.model import DriftSpec, ModelConfig


class TestClosedForms:
    def test_g_bound_examples(self):
        assert g_bound(1, 0.5, 0, 1, 0.0) == pytest.approx(2.0)
        assert g_bound(1, 0.5, 0, 1, 0.25) == pytest.approx(6.0)
        ref = (0.8 + 5) / 0.9 * math.exp(2 / 0.9)
        assert g_bound(0.8, 0.1, 1, 1, 1.0) == pytest.approx(ref, rel=1e-14)
        with pytest.raises(ValueError):
            g_bound(1, 1.0, 0, 1, 0.5)

    def test_B_bound_examples(self):
        assert B_bound(1, 0.1, 0, 0.8) == pytest.approx(4.8 / 0.9)
        assert B_bound(0, 0.5, 0, 0) == 0.0
        assert B_bound(1, 0.5, 1, 1) == pytest.approx(12 * math.exp(4))
        with pytest.raises(ValueError):
            B_bound(1, 1.2, 0, 0.8)

    def test_holder_B0_examples(self):
        assert holder_B0(1, 0.5, 0, 0.2) == pytest.approx(64.0)
        assert holder_B0(1, 0.1, 1, 0.2) == pytest.approx(math.e ** 2 * 85 / 0.9)
        assert holder_B0(1, 1 / (1 + 1e-9), 0, 0.2) > 1e9
        with pytest.raises(ValueError):
            holder_B0(2, 0.5, 0, 0.2)

    def test_barrier_examples(self):
        gamma, _ = barrier_params(0, 0.2, 10, 0, 1, 0.5, 20)
        assert gamma == pytest.approx(6.0)
        _, theta = barrier_params(0, 0.2, 10, 0, 1, 0.5, 20)
        assert theta == pytest.approx(0.8627, abs=1e-4)
        assert gradient_bound(20, 1, 0.5, 0, 0.2, 10, 0, 0.0) == pytest.approx(5.176, abs=1e-3)
        assert gradient_bound(20, 1, 0.5, 0, 0.2, 10, 0, 3.0) == \
            gradient_bound(20, 1, 0.5, 0, 0.2, 10, 0, 0.0)
        n = 1e6
        _, theta = barrier_params(0, 0.2, 10, 0, 1, 0.5, n)
        assert theta == pytest.approx(n ** 0.5 / 6, rel=1e-4)

    @given(st.floats(0, 2), st.floats(0, 0.9), st.floats(0, 20), st.floats(0, 2),
           st.floats(0.1, 10), st.floats(0.01, 1), st.integers(5, 200), st.floats(0, 1))
    def test_gradient_matches_barrier_slope(self, m, alpha, C_T, K, mu, eta, n, t):
        gamma, theta = barrier_params(m, alpha, C_T, K, mu, eta, n)
        h = 1e-7
        slope = -(barrier_function(t, 1.0, gamma, theta, K)
                  - barrier_function(t, 1.0 - h, gamma, theta, K)) / h
        g = gradient_bound(n, mu, eta, m, alpha, C_T, K, t)
        assert g == pytest.approx(theta * gamma * math.exp(K * t), rel=1e-12)
        assert abs(slope) == pytest.approx(g, rel=1e-5)


class TestImplicitConstants:
    def test_T0_examples(self):
        assert compute_T0(0.2, 0.0) == 1.0
        T0 = compute_T0(0.2, 1.0)
        assert T0 == pytest.approx(0.0244, abs=1e-4)
        assert T0 * math.exp(T0) <= 0.025 + 1e-12
        prev = 1.0
        for eps in (0.5, 0.2, 0.1, 0.05, 0.01):
            cur = compute_T0(eps, 1.0)
            assert cur < prev
            prev = cur

    def test_alpha0_example(self):
        a0 = compute_alpha0(0.2, 0, 0, 2.0, 0.8)
        assert a0 == pytest.approx(0.0103, abs=1e-4)
        # binding constraint: a * 4.8 / (1 - a) = 0.05
        assert a0 * 4.8 / (1 - a0) == pytest.approx(0.05, abs=1e-8)

    @given(st.floats(0.05, 0.9), st.floats(0, 2), st.floats(2, 20), st.floats(0.01, 20),
           st.floats(0, 1))
    def test_alpha0_nonincreasing_in_cprime(self, eps, lam, c1, dc, x):
        assert compute_alpha0(eps, lam, 0, c1 + dc, x) <= compute_alpha0(eps, lam, 0, c1, x)

    def test_alpha0_strictly_decreasing_when_ceiling_binds(self):
        vals = [compute_alpha0(0.2, 0, 0, c, 0.8) for c in (5.0, 10.0, 20.0)]
        assert vals[0] > vals[1] > vals[2]

    @given(st.floats(0.05, 0.9), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_alpha0_nonincreasing_in_Lambda_at_fixed_T0(self, eps, s1, s2, x):
        # T0 stays 1 while Lambda e^Lambda <= eps/8 and (1-eps) e^Lambda <= 1 - 7 eps/8
        lo, hi = sorted((s1 * eps / 16, s2 * eps / 16))
        if compute_T0(eps, hi) < 1.0:
            return
        assert compute_alpha0(eps, hi, 0, 2.0, x) <= compute_alpha0(eps, lo, 0, 2.0, x)

    def test_alpha0_can_grow_with_Lambda_once_T0_shrinks(self):
        # shrinking T0 shrinks B(T0), so the stated conditions are not monotone in Lambda
        assert compute_alpha0(0.2, 1.0, 0, 2.0, 0.8) > compute_alpha0(0.2, 0.0, 0, 2.0, 0.8)

    @given(st.floats(0.05, 0.9), st.floats(0, 2), st.floats(2, 10), st.floats(0, 1),
           st.floats(0.01, 0.99))
    def test_density_threshold_below_alpha0(self, eps, lam, cp, x, frac):
        a = frac * compute_alpha0(eps, lam, 0, cp, x)
        assert max(density_ceilings(eps, lam, cp, a, x)) < 1 / a

    @given(st.floats(0, 0.9), st.floats(0, 0.9), st.floats(0, 3), st.floats(0, 2),
           st.floats(0.01, 1), st.floats(0.01, 1))
    def test_envelope_monotone(self, a1, a2, lam, T, s1, s2):
        lo, hi = sorted((a1, a2))
        t1, t2 = sorted((s1 * T, s2 * T))
        assert g_bound(1, lo, lam, T, t1) <= g_bound(1, hi, lam, T, t2) + 1e-12
        assert g_bound(0.5, lo, lam, T, t1) <= g_bound(1, lo, lam + 0.1, T, t1)
        assert B_bound(t1, lo, lam, 0.5) <= B_bound(max(t2, t1), hi, lam + 0.1, 0.5) + 1e-12


class TestCalibration:
    def test_cprime_zero_drift(self):
        assert estimate_cprime(DriftSpec.zero()) == 2.0
        flat = DriftSpec.tabulated([-1, 1], [0, 0], Lambda=0, K=0, m=0)
        assert estimate_cprime(flat) == 2.0

    def test_cprime_needs_seed(self):
        with pytest.raises(ConfigError):
            estimate_cprime(DriftSpec.linear(1.0))

    def test_cprime_linear_calibration(self):
        c = estimate_cprime(DriftSpec.linear(1.0), samples=100_000, seed=3, n_steps=200)
        exact = cprime_linear_exact(1.0)
        assert 2.0 <= c <= 10.0
        # the calibrated value covers the exact Ornstein-Uhlenbeck envelope
        assert c >= exact

    def test_cdprime_monte_carlo_matches_series(self):
        p, se = estimate_cdprime(0.0, 0.0, samples=200_000, seed=5)
        exact = cdprime_exact(0.0, 0.0)
        assert 0 < exact < 0.0455
        assert abs(p - exact) < 5 * se + 2e-3  # discrete monitoring bias

    def test_cdprime_vanishes(self):
        assert cdprime_exact(0.5, 100.0) < 1e-12
        assert 0 < cdprime_exact(0.1, 5.0) < 1

    def test_oscillation_exponent(self):
        c = cdprime_exact(0.01, 10)
        eta = oscillation_exponent(c, 0.01, 10)
        assert eta == pytest.approx(-math.log(1 - c) / math.log(3.1))


class TestReport:
    def test_report_small_alpha(self):
        cfg = ModelConfig.create(alpha=0.005, x0=0.8)
        rep = bounds_report(cfg, c_prime=2.0, C_T=5.0)
        assert rep.is_valid()
        assert rep.T0 <= 1 and 0 < rep.alpha0 <= 1
        assert rep.n == 20  # ceil(4 / eps) with eps = 0.2
        assert any("0.104" in n for n in rep.notes)
        names = [r[0] for r in rep.csv_rows()]
        assert "alpha0" in names and "holderB" in names
        assert len({r[2] for r in rep.csv_rows()}) == 1

    def test_report_void_constants(self):
        cfg = ModelConfig.create(alpha=0.3, x0=0.8)
        rep = bounds_report(cfg, c_prime=2.0, C_T=5.0)
        assert math.isinf(rep.holderB)
        assert not rep.is_valid()
        assert any("void" in n for n in rep.notes)

    def test_key_values_are_plain_numbers(self):
        rep = bounds_report(ModelConfig.create(alpha=0.005, x0=0.8), c_prime=2.0, C_T=5.0)
        for line in rep.to_key_values().splitlines():
            key, value = line.split("=", 1)
            if key != "note":
                float(value)
        assert np.all(np.diff(rep.g_a) > 0)
