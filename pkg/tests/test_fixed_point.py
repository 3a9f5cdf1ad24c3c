import numpy as np
import pytest

from meanfield_if.bounds import g_bound
from meanfield_if.errors import PicardError
from meanfield_if.fixed_point import (chain_solve, curve_norm, envelope_guess,
                                      linear_decay_constant, lipschitz_estimate, picard_solve)
from meanfield_if.fokker_planck import default_grid, solve_nonlinear_fp
from meanfield_if.model import FiringCurve, ModelConfig


def test_lipschitz_examples():
    assert lipschitz_estimate(FiringCurve.zeros(1.0, 10)) == 0.0
    e = FiringCurve.on_grid(1.0, 10, lambda t: 2.5 * t, lambda t: 2.5 + 0 * t)
    assert lipschitz_estimate(e) == pytest.approx(2.5)


def test_curve_norm():
    a = FiringCurve.on_grid(1.0, 10, lambda t: t, lambda t: 1 + 0 * t)
    b = FiringCurve.on_grid(1.0, 10, lambda t: 2 * t, lambda t: 2 + 0 * t)
    assert curve_norm(a, b) == pytest.approx(2.0)


def test_linear_decay_constant():
    y = np.linspace(-1, 1, 201)
    p = 3.0 * (1 - y)
    assert linear_decay_constant(p, y, 0.8) == pytest.approx(3.0)


class TestPicard:
    def test_uncoupled_converges_immediately(self):
        cfg = ModelConfig.create(alpha=0.0, x0=0.8, T=0.5)
        g = default_grid(cfg, dy=0.01)
        e, diag = picard_solve(cfg, grid=g)
        # e_1 = Gamma(0), e_2 = Gamma(e_1) = e_1
        assert len(diag.deltas) == 2 and diag.deltas[-1] == 0.0

    def test_small_coupling(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.8, T=1.0)
        g = default_grid(cfg, dy=0.01)
        e, diag = picard_solve(cfg, grid=g, tol=1e-6)
        assert diag.longest_contracting_run() >= 3
        assert diag.residual <= 2e-6
        assert diag.envelope_ok and diag.rate_bound_ok
        d = np.array(diag.deltas)
        assert np.all(np.diff(d[1:]) < 0)
        for it in diag.iterates:
            assert np.all(it.values <= g_bound(1.0, 0.05, 0.0, diag.T1, it.times) + 1e-12)
        rows = diag.rows()
        assert rows[0][0] == 1 and np.isnan(rows[0][2])

    def test_uniqueness_probe(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.8, T=0.5)
        g = default_grid(cfg, dy=0.01)
        e0, _ = picard_solve(cfg, grid=g, tol=1e-7)
        e1, _ = picard_solve(cfg, grid=g, tol=1e-7,
                             initial_guess=lambda A, T, t: envelope_guess(A, 0.05, 0.0, T, t))
        assert curve_norm(e0, e1) <= 3e-7

    def test_fixed_point_equals_direct_solve(self):
        cfg = ModelConfig.create(alpha=0.2, x0=0.8, T=0.3)
        g = default_grid(cfg, dy=0.01)
        e, diag = picard_solve(cfg, grid=g, tol=1e-9)
        direct, _, _ = solve_nonlinear_fp(cfg, grid=g.with_T(diag.T1))
        assert np.abs(e.values - direct.values).max() < 1e-8

    def test_failure_carries_diagnostics(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.8, T=1.0)
        g = default_grid(cfg, dy=0.01)
        with pytest.raises(PicardError) as info:
            picard_solve(cfg, grid=g, max_iter=2, tol=1e-14)
        assert info.value.diagnostics.deltas


class TestChain:
    def test_single_window_matches_picard(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.8, T=0.5)
        g = default_grid(cfg, dy=0.01)
        e, _ = picard_solve(cfg, grid=g)
        c, blow, chain = chain_solve(cfg, grid=g)
        assert blow is None and len(chain.windows) == 1
        np.testing.assert_array_equal(c.values, e.values)

    def test_two_windows(self):
        cfg = ModelConfig.create(alpha=0.05, x0=0.8, T=2.0)
        g = default_grid(cfg, dy=0.01)
        c, blow, chain = chain_solve(cfg, grid=g)
        assert blow is None and len(chain.windows) >= 2
        assert c.T == pytest.approx(2.0)
        assert np.all(np.diff(c.values) >= 0)
        assert all(np.isfinite(chain.restart_C))
        assert all(gap <= chain.junction_tol for gap in chain.junction_gaps)
