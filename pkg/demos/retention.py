"""Optimal retention under the three premium principles.

Prints u*(0, Y0) for exponential claims next to the published explicit
formulas and the exact root, then the retention along a few simulated
intensity paths for Pareto claims.

    python3 demos/retention.py
"""

import math

import numpy as np

from coxreins import (
    ClaimModel,
    Constant,
    ExpAffine,
    FactorModel,
    PremiumPrinciple,
    ReinsuranceProblem,
    RiskPreferences,
    SimGrid,
    closed_form_exponential,
    simulate_factor,
)

T, ETA, THETA, R = 5.0, 0.5, 0.1, 0.05
factor = FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))
prefs = RiskPreferences(ETA, T)
lam0 = float(factor.lam(0.0, factor.y0))

print("Exponential claims, zeta = 2, t = 0, y = Y0")
exp_claims = ClaimModel.exponential(2.0)
for kind in ("evp", "vp", "iavp"):
    prob = ReinsuranceProblem(PremiumPrinciple(kind, THETA, exp_claims, factor, T), prefs, R)
    sol = prob.optimal_u(0.0, factor.y0)
    cf = closed_form_exponential(kind, 0.0, lam0, zeta=2.0, eta=ETA, rate=R, horizon=T, theta_r=THETA)
    print(f"  {kind:5s} bisection u* = {sol.u_star:.6f}  published formula = {float(cf.u_star):.6f}"
          f"  region = {sol.region.value}")

print("\nPareto claims along simulated factor paths (IAVP)")
pareto = ClaimModel.pareto(1.8182, 0.0545)
prob = ReinsuranceProblem(PremiumPrinciple("iavp", THETA, pareto, factor, T), prefs, R)
grid = SimGrid(0.0, T, 50)
y, lam = simulate_factor(factor, grid, seed=7, n_paths=3)
u, _, _ = prob.optimal_u_array(np.broadcast_to(grid.times, y.shape), y)
for i in range(0, grid.times.size, 10):
    cells = "  ".join(f"lam={lam[k, i]:.3f} u*={u[k, i]:.3f}" for k in range(3))
    print(f"  t={grid.times[i]:4.1f}  {cells}")
print(f"\nmean intensity at T: {lam[:, -1].mean():.3f} (start {lam0:.3f}); higher intensity, less cover bought")
