"""Optimal investment in the CEV market: Merton term plus hedging correction.

    python3 demos/investment.py
"""

from coxreins import MarketModel, RiskPreferences, estimate_g, optimal_w

prefs = RiskPreferences(0.5, 5.0)
cev = MarketModel.cev(mu=0.1, sigma=0.1, beta=0.5, rate=0.05, p0=1.0)

est = estimate_g(0.0, 1.0, cev, prefs.horizon, n_reps=20_000, seed=1)
w, merton, corr = optimal_w(0.0, 1.0, cev, prefs, est)
print(f"g(0, 1)     = {est.g:.5f} +/- {est.se_g:.1e}")
print(f"dg/dp(0, 1) = {est.dg_dp:.5f} +/- {est.se_dg_dp:.1e}")
print(f"w*(0, 1)    = {w:.4f} = Merton {merton:.4f} + correction {corr:.4f}")

gbm = MarketModel.constant(mu=0.1, sigma=0.2, rate=0.05)
print(f"\nconstant market at t = T: w* = {optimal_w(5.0, 1.0, gbm, prefs, 0.0)[0]!r}")
for eta in (0.25, 0.5, 1.0, 2.0):
    print(f"  eta = {eta:4.2f}: w*(0) = {optimal_w(0.0, 1.0, gbm, RiskPreferences(eta, 5.0), 0.0)[0]:.4f}")
