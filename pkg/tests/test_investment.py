import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coxreins.errors import DegenerateVolatility
from coxreins.investment import build_g_lattice, estimate_g, optimal_w, psi_w
from coxreins.models import MarketModel, Power, RiskPreferences
from oracles import cev_g_analytic, cev_g_analytic_dp, crank_nicolson_g

PREFS = RiskPreferences(0.5, 5.0)
CEV = MarketModel.cev(0.1, 0.1, 0.5, 0.05, 1.0)
GBM = MarketModel.constant(0.1, 0.2, 0.05, 1.0)

# frozen from the analytic oracle and the Crank-Nicolson oracle
CEV_G0 = -0.5673984
CEV_DG0 = 0.5529980


class TestOracles:
    def test_analytic_value(self):
        assert cev_g_analytic(0.0, 1.0, 0.1, 0.1, 0.05, 5.0) == pytest.approx(CEV_G0, abs=1e-7)
        assert cev_g_analytic_dp(0.0, 1.0, 0.1, 0.1, 0.05, 5.0) == pytest.approx(CEV_DG0, abs=1e-7)

    def test_pde_agrees_with_analytic(self):
        g, dg = crank_nicolson_g(0.1, 0.1, 0.5, 0.05, 5.0, n_x=401, n_t=400)
        assert g == pytest.approx(CEV_G0, abs=2e-5)
        assert dg == pytest.approx(CEV_DG0, abs=2e-5)


class TestEstimateG:
    def test_constant_market_exact(self):
        est = estimate_g(0.0, 1.0, GBM, 5.0, n_reps=1000, seed=1, n_steps=50)
        assert est.g == pytest.approx(-0.15625, rel=1e-12)
        assert est.se_g < 1e-12 and abs(est.dg_dp) < 1e-9

    def test_terminal_is_zero(self):
        est = estimate_g(5.0, 1.0, CEV, 5.0, n_reps=1000)
        assert est.g == 0.0 and est.dg_dp == 0.0

    def test_cev_against_analytic(self):
        est = estimate_g(0.0, 1.0, CEV, 5.0, n_reps=20_000, seed=4, n_steps=250)
        assert abs(est.g - CEV_G0) < 4 * est.se_g + 1e-3
        assert abs(est.dg_dp - CEV_DG0) < 4 * est.se_dg_dp + 1e-3

    def test_reps_floor(self):
        with pytest.raises(ValueError):
            estimate_g(0.0, 1.0, CEV, 5.0, n_reps=999)

    def test_degenerate_volatility(self):
        m = MarketModel.cev(0.1, 1e-9, 0.5, 0.05, 1.0)
        with pytest.raises(DegenerateVolatility):
            estimate_g(0.0, 1.0, m, 5.0, n_reps=1000, n_steps=10)

    def test_thread_invariance(self):
        a = estimate_g(0.0, 1.0, CEV, 5.0, n_reps=3000, seed=8, n_steps=50, chunk_size=1000, threads=1)
        b = estimate_g(0.0, 1.0, CEV, 5.0, n_reps=3000, seed=8, n_steps=50, chunk_size=1000, threads=3)
        assert a == b


class TestOptimalW:
    def test_merton(self):
        total, merton, corr = optimal_w(5.0, 1.0, GBM, PREFS, 0.0)
        assert total == merton and corr == 0.0
        assert abs(total - 2.5) <= 4 * math.ulp(2.5)

    def test_cev_decomposition(self):
        total, merton, corr = optimal_w(0.0, 1.0, CEV, PREFS, CEV_DG0)
        a = 0.5 * math.exp(0.25)
        assert merton == pytest.approx(0.05 / (a * 0.01), rel=1e-14)
        assert corr == pytest.approx(CEV_DG0 / a, rel=1e-14)
        assert total == pytest.approx(8.649358, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0, 5), p=st.floats(0.2, 5.0), g=st.floats(-2, 0), gp=st.floats(-1, 1))
def test_optimal_w_maximises_psi(t, p, g, gp):
    phi = math.exp(g)
    w_star = optimal_w(t, p, CEV, PREFS, gp)[0]
    best = psi_w(t, p, w_star, CEV, PREFS, phi, phi * gp)
    for dw in (-1.0, -1e-2, 1e-2, 1.0):
        assert psi_w(t, p, w_star + dw, CEV, PREFS, phi, phi * gp) <= best + 1e-12


class TestLattice:
    def test_homogeneous_lattice(self, tmp_path):
        lat = build_g_lattice(CEV, PREFS, n_t=3, n_p=3, n_reps=2000, seed=2, n_steps=200)
        for i, t in enumerate(lat.t):
            for j, p in enumerate(lat.p):
                exact = cev_g_analytic(t, p, 0.1, 0.1, 0.05, 5.0)
                assert abs(lat.g[i, j] - exact) <= 5 * lat.se_g[i, j] + 3e-3
        assert np.all(lat.g[-1] == 0.0)
        assert lat.g_at(0.0, 1.0) == pytest.approx(lat.g[0, 1])
        lat.to_csv(tmp_path / "g.csv")
        assert (tmp_path / "g.csv").read_text().splitlines()[0] == "t,p,g,dg_dp,se_g,se_dgdp"
        assert set(lat.growth_diagnostics()) == {"max_abs_g", "max_abs_dg_dp", "max_abs_p_dg_dp"}

    def test_inhomogeneous_path(self):
        vol = Power(0.1, 0.5)
        m = MarketModel(0.05, CEV.drift, lambda t, p: vol(t, p), 1.0)
        assert not m.time_homogeneous
        lat = build_g_lattice(m, PREFS, n_t=2, n_p=2, n_reps=1000, seed=2, n_steps=100)
        exact = cev_g_analytic(0.0, lat.p[0], 0.1, 0.1, 0.05, 5.0)
        assert abs(lat.g[0, 0] - exact) <= 5 * lat.se_g[0, 0] + 5e-3

    def test_w_map_constant_market(self):
        lat = build_g_lattice(GBM, PREFS, n_t=3, n_p=3, n_reps=1000, seed=0, n_steps=20)
        np.testing.assert_allclose(lat.w_map(np.array([0.0, 5.0]), np.array([1.0, 2.0])),
                                   [0.05 / (0.5 * math.exp(0.25) * 0.04), 2.5], rtol=1e-9)


class TestWorkedExamples:
    def test_unit_horizon_constant_market(self):
        est = estimate_g(4.0, 1.0, GBM, 5.0, n_reps=1000, seed=0, n_steps=10)
        assert est.g == pytest.approx(-0.03125, rel=1e-12) and abs(est.dg_dp) < 1e-9

    def test_large_eta_shrinks_w(self):
        w = [optimal_w(0.0, 1.0, CEV, RiskPreferences(eta, 5.0), CEV_DG0)[0] for eta in (0.5, 1, 5, 50, 500)]
        assert np.all(np.diff(w) < 0) and w[-1] < 0.01 * w[0]

    def test_flat_phi_gives_merton(self):
        phi = 0.7
        ws = np.linspace(-5, 20, 20001)
        psi = psi_w(1.0, 1.0, ws, CEV, PREFS, phi, 0.0)
        merton = optimal_w(1.0, 1.0, CEV, PREFS, 0.0)[1]
        assert ws[np.argmax(psi)] == pytest.approx(merton, abs=2e-3)

    def test_random_w_never_better(self):
        rng = np.random.default_rng(0)
        phi, dphi = math.exp(CEV_G0), math.exp(CEV_G0) * CEV_DG0
        w_star = optimal_w(0.0, 1.0, CEV, PREFS, CEV_DG0)[0]
        best = psi_w(0.0, 1.0, w_star, CEV, PREFS, phi, dphi)
        ws = rng.normal(w_star, 10.0, 1000)
        assert np.all(psi_w(0.0, 1.0, ws, CEV, PREFS, phi, dphi) <= best)
        for d in (-1e-3, 1e-3):
            assert psi_w(0.0, 1.0, w_star + d, CEV, PREFS, phi, dphi) <= best
