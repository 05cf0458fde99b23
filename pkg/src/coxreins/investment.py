"""Optimal investment: Monte Carlo estimation of ``g`` and the map ``w*(t, p)``.

``g(t, p) = -E^Q[∫_t^T ½((μ - R)/σ)² ds | P_t = p]`` where under ``Q`` the
asset drifts at the risk-free rate.  The optimal amount in the risky asset is

    w* = (μ - R) / (η σ² e^{R(T-t)})  +  p ∂g/∂p / (η e^{R(T-t)}).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _mc
from .errors import DegenerateVolatility
from .models import MarketModel, RiskPreferences
from .paths import SimGrid, euler_log_asset

log = logging.getLogger(__name__)

__all__ = ["GEstimate", "estimate_g", "optimal_w", "psi_w", "GLattice", "build_g_lattice"]

SIGMA_FLOOR = 1e-8
MIN_REPS = 1000
DEFAULT_BUMP = 1e-3


@dataclass(frozen=True)
class GEstimate:
    t: float
    p: float
    g: float
    dg_dp: float
    se_g: float
    se_dg_dp: float
    n_reps: int
    seed: int
    bump: float


def _sharpe_integrand(market: MarketModel, t, p):
    sig = market.sigma(t, p)
    if np.any(sig < SIGMA_FLOOR):
        raise DegenerateVolatility(f"sampled volatility {float(np.min(sig)):.3g} below {SIGMA_FLOOR}")
    return 0.5 * ((market.mu(t, p) - market.rate) / sig) ** 2


def _cumulative_integrals(market, grid, dW, p):
    """Per path, ``∫_{t0}^{s_j} ½k ds`` at every grid node (trapezoid)."""
    paths = euler_log_asset(market, grid, dW, p0=p, measure="risk-neutral")
    k = _sharpe_integrand(market, grid.times, paths)
    cum = np.zeros_like(k)
    cum[:, 1:] = np.cumsum(0.5 * (k[:, 1:] + k[:, :-1]) * grid.dt, axis=1)
    return cum


def estimate_g(
    t: float,
    p: float,
    market: MarketModel,
    horizon: float,
    n_reps: int = 10_000,
    seed: int = 0,
    n_steps: int = 500,
    bump: float = DEFAULT_BUMP,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> GEstimate:
    """Monte Carlo ``g(t, p)`` and ``∂g/∂p`` (central difference at ``p(1 ± h)``).

    The three starting prices share Brownian increments.  ``t == T`` returns
    exactly zero without simulating.

    Raises:
        DegenerateVolatility: sampled σ below 1e-8.
    """
    if n_reps < MIN_REPS:
        raise ValueError(f"n_reps must be at least {MIN_REPS}")
    if not p > 0:
        raise ValueError("p must be positive")
    if not 0 <= t <= horizon:
        raise ValueError("t must lie in [0, T]")
    if t == horizon:
        _sharpe_integrand(market, t, np.asarray([p]))
        return GEstimate(t, p, 0.0, 0.0, 0.0, 0.0, n_reps, seed, bump)
    grid = SimGrid(t, horizon, n_steps)
    hp = bump * p

    def work(c: _mc.Chunk):
        dW = _mc.rng(seed, c.index, _mc.ASSET).standard_normal((c.size, n_steps)) * math.sqrt(grid.dt)
        out = []
        for p_start in (p, p + hp, p - hp):
            cum = _cumulative_integrals(market, grid, dW, p_start)
            out.append(-cum[:, -1])
        return np.stack(out, axis=1)

    vals = np.concatenate(_mc.run_chunked(work, n_reps, chunk_size, threads))
    g, se_g = _mc.mean_se(vals[:, 0])
    grad, se_grad = _mc.mean_se((vals[:, 1] - vals[:, 2]) / (2.0 * hp))
    return GEstimate(t, p, g, grad, se_g, se_grad, n_reps, seed, bump)


def optimal_w(t, p, market: MarketModel, prefs: RiskPreferences, dg_dp):
    """Return ``(w*, merton_term, correction_term)``.

    ``dg_dp`` may be a :class:`GEstimate` or a number/array.
    """
    if isinstance(dg_dp, GEstimate):
        dg_dp = dg_dp.dg_dp
    sig = market.sigma(t, p)
    if np.any(np.asarray(sig) < SIGMA_FLOOR):
        raise DegenerateVolatility("volatility below floor in optimal_w")
    scale = prefs.discount_weight(market.rate, t)
    merton = (market.mu(t, p) - market.rate) / (scale * sig**2)
    correction = np.asarray(p, float) * np.asarray(dg_dp, float) / scale
    total = merton + correction
    if np.ndim(total) == 0:
        return float(total), float(merton), float(correction)
    return total, merton, correction


def psi_w(t, p, w, market: MarketModel, prefs: RiskPreferences, phi, dphi_dp):
    """Investment part of the reduced HJB: linear minus quadratic in ``w``."""
    scale = prefs.discount_weight(market.rate, t)
    sig2 = market.sigma(t, p) ** 2
    lin = scale * ((market.mu(t, p) - market.rate) * phi + p * sig2 * dphi_dp) * w
    return lin - 0.5 * sig2 * scale**2 * phi * w**2


@dataclass(frozen=True)
class GLattice:
    """``g`` and ``∂g/∂p`` tabulated on a (t, p) lattice.

    Interpolation is bilinear in ``(t, ln p)``; prices outside the lattice
    are clamped to its edge.
    """

    t: np.ndarray
    p: np.ndarray
    g: np.ndarray
    dg_dp: np.ndarray
    se_g: np.ndarray
    se_dg_dp: np.ndarray
    market: MarketModel
    prefs: RiskPreferences
    n_reps: int
    seed: int

    def _interp(self, table, t, p):
        from .reinsurance import _bilinear

        return _bilinear(self.t, np.log(self.p), table, t, np.log(np.asarray(p, float)))

    def g_at(self, t, p):
        return self._interp(self.g, t, p)

    def dg_dp_at(self, t, p):
        return self._interp(self.dg_dp, t, p)

    def w_map(self, t, p):
        return optimal_w(t, p, self.market, self.prefs, self.dg_dp_at(t, p))[0]

    def rows(self):
        for i, ti in enumerate(self.t):
            for j, pj in enumerate(self.p):
                yield ti, pj, self.g[i, j], self.dg_dp[i, j], self.se_g[i, j], self.se_dg_dp[i, j]

    def to_csv(self, path):
        """Columns ``t, p, g, dg_dp, se_g, se_dgdp``."""
        from .io import write_csv

        return write_csv(path, ["t", "p", "g", "dg_dp", "se_g", "se_dgdp"], self.rows())

    def growth_diagnostics(self) -> dict:
        """Empirical bounds on ``|g|`` and ``|∂g/∂p|`` over the lattice."""
        return {
            "max_abs_g": float(np.max(np.abs(self.g))),
            "max_abs_dg_dp": float(np.max(np.abs(self.dg_dp))),
            "max_abs_p_dg_dp": float(np.max(np.abs(self.dg_dp * self.p[None, :]))),
        }


def build_g_lattice(
    market: MarketModel,
    prefs: RiskPreferences,
    n_t: int = 50,
    n_p: int = 50,
    p_range: tuple[float, float] | None = None,
    n_reps: int = 4000,
    seed: int = 0,
    n_steps: int = 500,
    bump: float = DEFAULT_BUMP,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> GLattice:
    """Estimate ``g`` on ``n_t`` times in [0, T] and ``n_p`` geometric prices.

    Every price node reuses the same Brownian increments.  For time-homogeneous
    coefficients one simulation over [0, T] per price node serves all times,
    since ``g(t, p)`` then depends on ``T - t`` only.
    """
    T = prefs.horizon
    lo, hi = p_range if p_range is not None else (market.p0 / 5.0, 5.0 * market.p0)
    t_nodes = np.linspace(0.0, T, n_t)
    p_nodes = np.geomspace(lo, hi, n_p)
    shape = (n_t, n_p)
    g, dg, se_g, se_dg = (np.zeros(shape) for _ in range(4))

    if market.time_homogeneous:
        grid = SimGrid(0.0, T, n_steps)
        remaining = T - t_nodes
        pos = remaining / grid.dt
        j = np.clip(np.floor(pos).astype(int), 0, n_steps - 1)
        frac = pos - j

        def at_remaining(cum):
            return cum[:, j] * (1.0 - frac) + cum[:, j + 1] * frac

        def work(c: _mc.Chunk):
            dW = _mc.rng(seed, c.index, _mc.ASSET).standard_normal((c.size, n_steps)) * math.sqrt(grid.dt)
            sums = np.zeros((4, n_t, n_p))
            for jp, pj in enumerate(p_nodes):
                hp = bump * pj
                base, up, down = (
                    -at_remaining(_cumulative_integrals(market, grid, dW, ps)) for ps in (pj, pj + hp, pj - hp)
                )
                d = (up - down) / (2.0 * hp)
                sums[:, :, jp] = base.sum(0), (base**2).sum(0), d.sum(0), (d**2).sum(0)
            return sums

        total = np.sum(_mc.run_chunked(work, n_reps, chunk_size, threads), axis=0)
        n = n_reps

        def moments(s1, s2):
            mean = s1 / n
            var = np.maximum(s2 - n * mean**2, 0.0) / (n - 1)
            return mean, np.sqrt(var / n)

        g, se_g = moments(total[0], total[1])
        dg, se_dg = moments(total[2], total[3])
    else:
        for i, ti in enumerate(t_nodes):
            for jp, pj in enumerate(p_nodes):
                est = estimate_g(ti, pj, market, T, n_reps, seed, n_steps, bump, chunk_size, threads)
                g[i, jp], dg[i, jp], se_g[i, jp], se_dg[i, jp] = est.g, est.dg_dp, est.se_g, est.se_dg_dp
    lat = GLattice(t_nodes, p_nodes, g, dg, se_g, se_dg, market, prefs, n_reps, seed)
    log.info("g lattice built: %s", lat.growth_diagnostics())
    return lat
