import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meanfield_if.fokker_planck import default_grid, solve_killed_fp, solve_nonlinear_fp
from meanfield_if.model import FiringCurve, ModelConfig
from meanfield_if.validation import (CheckReport, check_barrier, check_density_decay,
                                     check_holder, compare_curves, fit_mu)


def test_report_margin_sign_enforced():
    CheckReport("x", True, 0.0, ())
    with pytest.raises(ValueError):
        CheckReport("x", True, -1.0, ())
    with pytest.raises(ValueError):
        CheckReport("x", False, 1.0, ())


class TestHolder:
    def test_zero_curve(self):
        r = check_holder(FiringCurve.zeros(1.0, 100), 0.0, 0.2)
        assert r.passed and r.worst_margin >= 0

    def test_equality_case(self):
        B = 0.5
        e = FiringCurve.on_grid(1.0, 400, lambda t: B * np.sqrt(t),
                                lambda t: np.where(t > 0, B / (2 * np.sqrt(np.maximum(t, 1e-300))),
                                                   0.0))
        r = check_holder(e, B, 0.5)
        assert r.passed and r.worst_margin == pytest.approx(0.0, abs=1e-12)
        assert r.location[0] == 0.0

    @given(st.lists(st.floats(0, 10), min_size=3, max_size=50))
    def test_huge_B_passes_zero_B_fails(self, rates):
        r = np.array(rates) + 1e-3
        dt = 0.01
        vals = np.concatenate([[0.0], np.cumsum(0.5 * (r[1:] + r[:-1]) * dt)])
        e = FiringCurve(np.arange(r.size) * dt, vals, r)
        assert check_holder(e, 1e12, 0.5, windowed=False).passed
        assert not check_holder(e, 0.0, 0.5).passed

    def test_empty_window_is_vacuous(self):
        r = check_holder(FiringCurve.zeros(1.0, 10), 1e6, 0.2)
        assert r.passed and math.isinf(r.worst_margin)


def test_density_decay_small_time():
    cfg = ModelConfig.create(alpha=0.05, x0=0.0, T=0.01)
    g = default_grid(cfg, dy=0.01)
    _, f, _ = solve_nonlinear_fp(cfg, grid=g)
    r = check_density_decay(f, cfg.epsilon)
    assert r.passed and r.value < 1e-6


class TestBarrier:
    def test_empty_strip_passes(self):
        cfg = ModelConfig.create(alpha=0.05, x0=-2.0, T=0.01)
        g = default_grid(cfg, dy=0.01)
        f = solve_killed_fp(cfg, FiringCurve.zeros(g.T, g.n_steps), grid=g)
        assert check_barrier(f, 2.0, 1.0, 0.0, 20).passed

    def test_initial_mass_in_strip(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.97, T=0.01, epsilon=0.03)
        g = default_grid(cfg, dy=0.01)
        f = solve_killed_fp(cfg, FiringCurve.zeros(g.T, g.n_steps), grid=g)
        r = check_barrier(f, 2.0, 1.0, 0.0, 20)
        assert not r.passed and "hypothesis-not-met" in r.details

    def test_fit_mu_bounds_density(self, brownian_cfg, coarse_grid):
        f = solve_killed_fp(brownian_cfg, FiringCurve.zeros(1.0, coarse_grid.n_steps),
                            grid=coarse_grid)
        mu = fit_mu(f, 0.5, 0.2)
        y = f.y
        sel = (y >= 0.95) & (y < 1)
        assert np.all(f.snapshots[:, sel] <= mu * (1 - y[sel]) ** 0.5 + 1e-12)


def test_compare_curves_examples():
    a = FiringCurve.on_grid(1.0, 10, lambda t: t, lambda t: 1 + 0 * t)
    b = FiringCurve.on_grid(1.0, 10, lambda t: 2 * t, lambda t: 2 + 0 * t)
    assert compare_curves(a, a) == (0.0, 0.0)
    assert compare_curves(a, b) == pytest.approx((1.0, 1.0))
    with pytest.raises(ValueError):
        compare_curves(a, FiringCurve.zeros(1.0, 20))


@given(st.lists(st.floats(0, 20), min_size=3, max_size=40), st.floats(0, 30))
def test_pruned_scan_matches_brute_force(rates, B):
    r = np.array(rates)
    dt = 0.01
    vals = np.concatenate([[0.0], np.cumsum(0.5 * (r[1:] + r[:-1]) * dt)])
    e = FiringCurve(np.arange(r.size) * dt, vals, r)
    t = e.times
    brute = min(B * np.sqrt(t[j] - t[i]) - (vals[j] - vals[i])
                for i in range(r.size) for j in range(i + 1, r.size))
    assert check_holder(e, B, 1.0, windowed=False).worst_margin == pytest.approx(brute, abs=1e-12)
