"""Wealth simulation, Feynman–Kac value assembly and optimality checks.

Terminal wealth under a feedback strategy ``(u(t, Y), w(t, P))`` is built
from the integral representation

    X_T = x e^{RT} + ∫ e^{R(T-r)} (c - q) dr + ∫ e^{R(T-r)} w (μ - R) dr
          + ∫ e^{R(T-r)} w σ dW - Σ_n e^{R(T-T_n)} (1 - u) Z_n,

with trapezoid drift integrals, a left-point stochastic integral, and each
claim discounted from its exact arrival time.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _mc
from .errors import InsufficientReplications, NonFiniteState
from .paths import PathBundle, SimGrid, euler_factor, simulate_chunk

log = logging.getLogger(__name__)

__all__ = [
    "StrategyField",
    "WealthResult",
    "simulate_wealth",
    "FEstimate",
    "estimate_f",
    "value_function",
    "VarianceReport",
    "variance_decomposition",
    "TournamentEntry",
    "TournamentReport",
    "perturbation_set",
    "dominance_tournament",
]

U_SHIFTS = (-0.1, -0.05, 0.05, 0.1)
W_SCALES = (0.8, 0.9, 1.0, 1.1, 1.2)


@dataclass(frozen=True)
class StrategyField:
    """Feedback maps ``u(t, y)`` in [0, 1] and ``w(t, p)``."""

    u_map: Callable
    w_map: Callable
    provenance: str = "custom"

    @classmethod
    def constant(cls, u: float, w: float) -> "StrategyField":
        if not 0.0 <= u <= 1.0:
            raise ValueError("constant retention must lie in [0, 1]")
        return cls(_ConstMap(u), _ConstMap(w), "constant")

    @classmethod
    def optimal(cls, surface, lattice) -> "StrategyField":
        """``u*`` from a strategy surface and ``w*`` from a g lattice."""
        return cls(surface.u, lattice.w_map, "optimal")

    def u(self, t, y):
        u = np.asarray(self.u_map(t, y), float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError(f"{self.provenance} strategy produced retention outside [0, 1]")
        return np.broadcast_to(u, np.broadcast(np.asarray(t), np.asarray(y)).shape)

    def w(self, t, p):
        return np.broadcast_to(np.asarray(self.w_map(t, p), float),
                               np.broadcast(np.asarray(t), np.asarray(p)).shape)


@dataclass(frozen=True)
class _ConstMap:
    value: float

    def __call__(self, t, x):
        return np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, self.value)


@dataclass(frozen=True)
class WealthResult:
    terminal_wealth: np.ndarray
    eta: float
    seed: int

    @property
    def n_reps(self) -> int:
        return int(self.terminal_wealth.size)

    @property
    def utilities(self) -> np.ndarray:
        return -np.expm1(-self.eta * self.terminal_wealth)

    @property
    def mean_utility(self) -> float:
        return _mc.mean_se(self.utilities)[0]

    @property
    def se(self) -> float:
        return _mc.mean_se(self.utilities)[1]

    def summary(self) -> dict:
        q = np.percentile(self.terminal_wealth, [5, 50, 95])
        return {
            "mean_utility": self.mean_utility,
            "se": self.se,
            "mean_terminal_wealth": float(self.terminal_wealth.mean()),
            "quantiles": [float(v) for v in q],
            "n_reps": self.n_reps,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# wealth components on one chunk of paths


@dataclass
class _ChunkTerms:
    """Per-path pieces of terminal wealth for one chunk of simulated paths."""

    scenario: object
    paths: PathBundle
    t: np.ndarray = field(init=False)
    disc: np.ndarray = field(init=False)

    def __post_init__(self):
        grid = self.paths.grid
        self.t = grid.times
        self.disc = np.exp(self.scenario.market.rate * (grid.T - self.t))
        ev = self.paths.events
        self.claim_disc = np.exp(self.scenario.market.rate * (grid.T - ev.time))
        self.c = self.scenario.c(self.t, self.paths.y)

    def base(self, x0: float) -> np.ndarray:
        return np.full(self.paths.n_reps, x0 * self.disc[0])

    def reinsurance(self, u: np.ndarray) -> np.ndarray:
        """``∫ e^{R(T-r)}(c - q) dr - Σ e^{R(T-T_n)}(1 - u) Z_n`` with ``u`` on the nodes."""
        sc, p = self.scenario, self.paths
        q = sc.principle.q(self.t, p.y, u)
        drift = _mc.trapezoid(self.disc * (self.c - q), p.grid.dt)
        ev = p.events
        u_claim = u[ev.rep, ev.cell] if u.ndim == 2 else np.full(len(ev), float(u))
        jumps = ev.per_rep_sum(self.claim_disc * (1.0 - u_claim) * ev.mark)
        return drift - jumps

    def investment(self, w: np.ndarray) -> np.ndarray:
        """``∫ e^{R(T-r)} w (μ - R) dr + Σ e^{R(T-t_i)} w_i σ_i ΔW_i``."""
        sc, p = self.scenario, self.paths
        mkt = sc.market
        w = np.broadcast_to(w, p.p.shape)
        drift = _mc.trapezoid(self.disc * w * (mkt.mu(self.t, p.p) - mkt.rate), p.grid.dt)
        sig = mkt.sigma(self.t[:-1], p.p[:, :-1])
        stoch = np.sum(self.disc[:-1] * w[:, :-1] * sig * p.dW_asset, axis=1)
        return drift + stoch


def _chunk_paths(scenario, seed, chunk):
    return simulate_chunk(scenario.factor, scenario.market, scenario.claims, scenario.grid, seed, chunk)


def simulate_wealth(
    strategy: StrategyField,
    scenario,
    n_reps: int,
    seed: int,
    x0: float | None = None,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> WealthResult:
    """Terminal wealth of ``n_reps`` replications under a feedback strategy.

    Raises:
        NonFiniteState: a terminal wealth is NaN or infinite.
    """
    x0 = scenario.initial_wealth if x0 is None else x0

    def work(c):
        paths = _chunk_paths(scenario, seed, c)
        terms = _ChunkTerms(scenario, paths)
        u = strategy.u(terms.t, paths.y)
        w = strategy.w(terms.t, paths.p)
        return terms.base(x0) + terms.reinsurance(u) + terms.investment(w)

    xt = np.concatenate(_mc.run_chunked(work, n_reps, chunk_size, threads))
    if not np.all(np.isfinite(xt)):
        raise NonFiniteState("terminal wealth is not finite")
    return WealthResult(xt, scenario.prefs.eta, seed)


# ---------------------------------------------------------------------------
# Feynman–Kac pieces


@dataclass(frozen=True)
class FEstimate:
    t: float
    y: float
    value: float
    se: float
    n_reps: int
    seed: int


def estimate_f(
    t: float,
    y: float,
    scenario,
    n_reps: int = 10_000,
    seed: int = 0,
    surface=None,
    n_steps: int | None = None,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> FEstimate:
    """``f(t, y) = E[exp(-∫_t^T (η e^{R(T-s)} c + Ψ*) ds) | Y_t = y]``.

    ``Ψ*`` is read from ``surface`` when given, otherwise the optimal
    retention is solved at every visited node.
    """
    T = scenario.prefs.horizon
    if t == T:
        return FEstimate(t, y, 1.0, 0.0, n_reps, seed)
    grid = SimGrid(t, T, n_steps or scenario.n_steps)
    prob = scenario.reinsurance
    times = grid.times

    def psi_star(tt, yy):
        if surface is not None:
            return surface.psi(tt, yy)
        u, _, _ = prob.optimal_u_array(tt, yy)
        return prob.psi_u(np.broadcast_to(tt, yy.shape), yy, u)

    def work(c):
        dW = _mc.rng(seed, c.index, _mc.FACTOR).standard_normal((c.size, grid.n_cells)) * math.sqrt(grid.dt)
        ys = euler_factor(scenario.factor, grid, dW, y0=y)
        tt = np.broadcast_to(times, ys.shape)
        integrand = prob.a(times) * scenario.c(times, ys) + psi_star(tt, ys)
        samples = np.exp(-_mc.trapezoid(integrand, grid.dt))
        if not np.all(samples > 0):
            raise NonFiniteState("f sample is not strictly positive")
        return samples

    vals = np.concatenate(_mc.run_chunked(work, n_reps, chunk_size, threads))
    m, se = _mc.mean_se(vals)
    return FEstimate(t, y, m, se, n_reps, seed)


def value_function(t: float, x, f: float, g: float, eta: float, rate: float, horizon: float):
    """``v = -exp(-η x e^{R(T-t)}) f e^{g}``; exactly ``-e^{-ηx}`` at ``t = T``."""
    if t == horizon:
        return -np.exp(-eta * np.asarray(x, float))
    if not f > 0:
        raise ValueError("f must be positive")
    return -np.exp(-eta * np.asarray(x, float) * math.exp(rate * (horizon - t))) * f * math.exp(g)


# ---------------------------------------------------------------------------
# variance decomposition of the ceded claims


@dataclass(frozen=True)
class VarianceReport:
    lhs: float
    se_lhs: float
    term_second_moment: float
    se_term_second_moment: float
    term_intensity: float
    se_term_intensity: float
    diff: float
    se_diff: float
    holds: bool
    n_reps: int
    seed: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def variance_decomposition(u_map, scenario, n_reps: int, seed: int, chunk_size: int = _mc.DEFAULT_CHUNK,
                           threads: int = 1) -> VarianceReport:
    """Check ``Var[∫u dC] = E[Z²] E[∫u²λ ds] + E[Z]² Var[∫uλ ds]`` by Monte Carlo.

    Standard errors come from influence functions of each moment estimator;
    the identity holds when the difference is within 3 standard errors.

    Raises:
        InsufficientReplications: SE of the left side exceeds 10% of it.
    """
    from .paths import simulate_claims, simulate_factor

    grid = scenario.grid
    y, lam = simulate_factor(scenario.factor, grid, seed, n_reps, chunk_size, threads)
    events = simulate_claims(lam, scenario.claims, grid, seed, chunk_size, threads)
    u = np.clip(np.broadcast_to(np.asarray(u_map(grid.times, y), float), y.shape), 0.0, 1.0)
    ceded = events.per_rep_sum(u[events.rep, events.cell] * events.mark) if len(events) else np.zeros(n_reps)
    b = _mc.trapezoid(u**2 * lam, grid.dt)
    cc = _mc.trapezoid(u * lam, grid.dt)
    m1, m2 = scenario.claims.mean, scenario.claims.second_moment
    n = n_reps

    def var_infl(x):
        m, v = x.mean(), x.var(ddof=1)
        return v, (x - m) ** 2 - v

    lhs, i_lhs = var_infl(ceded)
    vc, i_c = var_infl(cc)
    t1, i_t1 = m2 * b.mean(), m2 * (b - b.mean())
    t2, i_t2 = m1**2 * vc, m1**2 * i_c
    se = lambda x: float(np.std(x, ddof=1) / math.sqrt(n))
    se_lhs = se(i_lhs)
    if lhs > 0 and se_lhs > 0.1 * lhs:
        raise InsufficientReplications(f"SE {se_lhs:.3g} exceeds 10% of Var = {lhs:.3g}")
    diff = lhs - t1 - t2
    se_diff = se(i_lhs - i_t1 - i_t2)
    holds = bool(abs(diff) <= 3.0 * se_diff) if se_diff > 0 else bool(diff == 0.0)
    return VarianceReport(float(lhs), se_lhs, float(t1), se(i_t1), float(t2), se(i_t2),
                          float(diff), se_diff, holds, n, seed)


# ---------------------------------------------------------------------------
# dominance tournament


@dataclass(frozen=True)
class TournamentEntry:
    name: str
    mean_utility: float
    se: float
    diff: float
    se_diff: float
    passed: bool


@dataclass(frozen=True)
class TournamentReport:
    optimal_utility: float
    optimal_se: float
    entries: tuple
    n_reps: int
    seed: int

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def rows(self):
        for e in self.entries:
            yield e.name, e.mean_utility, e.se, e.diff, e.se_diff, e.passed


def perturbation_set(u0: float, w0: float):
    """The 24 challengers: 20 perturbations of the optimum and 4 constants.

    Perturbations shift ``u*`` by -0.1, -0.05, +0.05 or +0.1 (clipped to
    [0, 1]) and scale ``w*`` by 0.8, 0.9, 1.0, 1.1 or 1.2.  The constants are
    (0, 0), (1, 0), (0.5, 0) and the time-zero optimum ``(u0, w0)``.
    """
    out = [(f"u{du:+g}_w*{s:g}", ("shift", du, s)) for du in U_SHIFTS for s in W_SCALES]
    out += [
        ("const(0,0)", ("const", 0.0, 0.0)),
        ("const(1,0)", ("const", 1.0, 0.0)),
        ("const(0.5,0)", ("const", 0.5, 0.0)),
        (f"const({u0:.6g},{w0:.6g})", ("const", u0, w0)),
    ]
    return out


def dominance_tournament(
    scenario,
    optimal: StrategyField,
    n_reps: int,
    seed: int,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> TournamentReport:
    """Compare the optimal field with the documented challengers on common paths.

    A challenger passes when the paired mean utility difference
    ``E[U(opt)] - E[U(challenger)]`` is at least ``-2 SE``.
    Wealth is linear in ``w``, so scaled investment policies reuse one
    simulated investment integral.
    """
    x0 = scenario.initial_wealth
    eta = scenario.prefs.eta
    y0, p0 = scenario.factor.y0, scenario.market.p0
    u0 = float(optimal.u(0.0, y0))
    w0 = float(optimal.w(0.0, p0))
    challengers = perturbation_set(u0, w0)

    def work(c):
        paths = _chunk_paths(scenario, seed, c)
        terms = _ChunkTerms(scenario, paths)
        u_opt = np.array(optimal.u(terms.t, paths.y))
        w_opt = np.array(optimal.w(terms.t, paths.p))
        base = terms.base(x0)
        inv_opt = terms.investment(w_opt)
        inv_unit = terms.investment(np.ones_like(w_opt))
        reins = {0.0: terms.reinsurance(u_opt)}
        for du in U_SHIFTS:
            reins[du] = terms.reinsurance(np.clip(u_opt + du, 0.0, 1.0))
        x_opt = base + reins[0.0] + inv_opt
        cols = [x_opt]
        for _, (kind, a, b) in challengers:
            if kind == "shift":
                cols.append(base + reins[a] + b * inv_opt)
            else:
                cols.append(base + terms.reinsurance(np.full_like(u_opt, a)) + b * inv_unit)
        return np.stack(cols, axis=1)

    xt = np.concatenate(_mc.run_chunked(work, n_reps, chunk_size, threads))
    if not np.all(np.isfinite(xt)):
        raise NonFiniteState("terminal wealth is not finite")
    util = -np.expm1(-eta * xt)
    m_opt, se_opt = _mc.mean_se(util[:, 0])
    entries = []
    for k, (name, _) in enumerate(challengers, start=1):
        m, s = _mc.mean_se(util[:, k])
        d, sd = _mc.mean_se(util[:, 0] - util[:, k])
        entries.append(TournamentEntry(name, m, s, d, sd, bool(d >= -2.0 * sd)))
    return TournamentReport(m_opt, se_opt, tuple(entries), n_reps, seed)
