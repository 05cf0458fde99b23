"""Seeded Euler simulation of the factor, the risky asset and Cox claim arrivals.

Replications are simulated in fixed-size chunks with one independent random
stream per process (factor noise, asset noise, arrival thinning, marks); see
:mod:`coxreins._mc` for the splitting rule.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import _mc
from .errors import MajorantBreach, NonFiniteState
from .models import ClaimModel, FactorModel, MarketModel

log = logging.getLogger(__name__)

__all__ = [
    "SimGrid",
    "ClaimEvents",
    "PathBundle",
    "euler_factor",
    "euler_log_asset",
    "simulate_factor",
    "simulate_asset",
    "simulate_claims",
    "simulate_chunk",
    "simulate_paths",
]

MAJORANT_FACTOR = 1.05


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid ``t0 = s_0 < ... < s_n = T``.

    ``T == t0`` is accepted as an empty window (no cells, ``dt = 0``); it only
    arises at the terminal time where every integral is zero.
    """

    t0: float
    T: float
    n_steps: int = 500

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if not self.T >= self.t0:
            raise ValueError("grid end must not precede its start")

    @property
    def empty(self) -> bool:
        return self.T == self.t0

    @property
    def n_cells(self) -> int:
        return 0 if self.empty else self.n_steps

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        if self.empty:
            return np.array([self.t0])
        return np.linspace(self.t0, self.T, self.n_steps + 1)


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteState(f"{what} became non-finite during simulation")


def euler_factor(model: FactorModel, grid: SimGrid, dW: np.ndarray, y0=None) -> np.ndarray:
    """Euler–Maruyama for ``Y`` driven by Brownian increments ``dW`` of shape (n, cells)."""
    t = grid.times
    n = dW.shape[0]
    y = np.empty((n, grid.n_cells + 1))
    y[:, 0] = model.y0 if y0 is None else y0
    for i in range(grid.n_cells):
        yi = y[:, i]
        y[:, i + 1] = yi + model.b(t[i], yi) * grid.dt + model.gamma(t[i], yi) * dW[:, i]
    _check_finite(y, "factor Y")
    return y


def euler_log_asset(
    model: MarketModel, grid: SimGrid, dW: np.ndarray, p0=None, measure: str = "physical"
) -> np.ndarray:
    """Euler scheme for ``ln P``; under ``measure='risk-neutral'`` the drift is ``R``."""
    if measure not in ("physical", "risk-neutral"):
        raise ValueError(f"unknown measure {measure!r}")
    t = grid.times
    n = dW.shape[0]
    logp = np.empty((n, grid.n_cells + 1))
    logp[:, 0] = np.log(model.p0 if p0 is None else p0)
    for i in range(grid.n_cells):
        p = np.exp(logp[:, i])
        sig = model.sigma(t[i], p)
        mu = model.rate if measure == "risk-neutral" else model.mu(t[i], p)
        logp[:, i + 1] = logp[:, i] + (mu - 0.5 * sig**2) * grid.dt + sig * dW[:, i]
    p = np.exp(logp)
    _check_finite(p, "asset price P")
    if np.any(p <= 0):
        raise NonFiniteState("asset price underflowed to zero")
    return p


def _normals(g: np.random.Generator, n: int, grid: SimGrid) -> np.ndarray:
    return g.standard_normal((n, grid.n_cells)) * np.sqrt(grid.dt)


def simulate_factor(
    model: FactorModel,
    grid: SimGrid,
    seed: int,
    n_paths: int = 1,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``(Y, λ)`` paths, each of shape (n_paths, n_steps + 1)."""

    def work(c: _mc.Chunk):
        dW = _normals(_mc.rng(seed, c.index, _mc.FACTOR), c.size, grid)
        y = euler_factor(model, grid, dW)
        return y, model.lam(grid.times, y)

    parts = _mc.run_chunked(work, n_paths, chunk_size, threads)
    y = np.concatenate([p[0] for p in parts])
    lam = np.concatenate([p[1] for p in parts])
    if not np.all(lam > 0):
        raise NonFiniteState("intensity path is not strictly positive")
    return y, lam


def simulate_asset(
    model: MarketModel,
    grid: SimGrid,
    seed: int,
    measure: str = "physical",
    n_paths: int = 1,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
    return_increments: bool = False,
):
    """Simulate price paths of shape (n_paths, n_steps + 1) in log coordinates.

    With ``return_increments`` the Brownian increments are returned too.
    """

    def work(c: _mc.Chunk):
        dW = _normals(_mc.rng(seed, c.index, _mc.ASSET), c.size, grid)
        return euler_log_asset(model, grid, dW, measure=measure), dW

    parts = _mc.run_chunked(work, n_paths, chunk_size, threads)
    p = np.concatenate([x[0] for x in parts])
    if return_increments:
        return p, np.concatenate([x[1] for x in parts])
    return p


@dataclass(frozen=True)
class ClaimEvents:
    """Flat arrays of claim events sorted by (replication, time).

    ``cell`` is the index of the grid cell ``(s_i, s_{i+1}]`` holding the event.
    """

    rep: np.ndarray
    cell: np.ndarray
    time: np.ndarray
    mark: np.ndarray
    n_reps: int

    def __len__(self) -> int:
        return int(self.time.size)

    def counts(self) -> np.ndarray:
        return np.bincount(self.rep, minlength=self.n_reps)

    def per_rep_sum(self, weights: np.ndarray) -> np.ndarray:
        return np.bincount(self.rep, weights=weights, minlength=self.n_reps)


def _thin_chunk(lam: np.ndarray, grid: SimGrid, claims: ClaimModel, g_arr, g_mark, factor: float):
    n = lam.shape[0]
    if grid.n_cells == 0:
        z = np.empty(0)
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), z, z
    t = grid.times
    left, right = lam[:, :-1], lam[:, 1:]
    bar = factor * np.maximum(left, right)
    counts = g_arr.poisson(bar * grid.dt)
    rep, cell = np.nonzero(counts)
    k = counts[rep, cell]
    rep = np.repeat(rep, k)
    cell = np.repeat(cell, k)
    frac = 1.0 - g_arr.random(rep.size)  # in (0, 1]
    times = t[cell] + frac * grid.dt
    lam_at = left[rep, cell] + frac * (right[rep, cell] - left[rep, cell])
    lam_bar = bar[rep, cell]
    if np.any(lam_at > lam_bar):
        raise MajorantBreach("intensity exceeded the thinning majorant; refine the grid")
    keep = g_arr.random(rep.size) * lam_bar < lam_at
    rep, cell, times = rep[keep], cell[keep], times[keep]
    order = np.lexsort((times, rep))
    rep, cell, times = rep[order], cell[order], times[order]
    marks = claims.sample(g_mark, times.size)
    return rep, cell, times, marks


def simulate_claims(
    lam_path: np.ndarray,
    claims: ClaimModel,
    grid: SimGrid,
    seed: int,
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
    majorant_factor: float = MAJORANT_FACTOR,
) -> ClaimEvents:
    """Cox arrivals by thinning, given intensity paths of shape (n, n_steps + 1).

    Within a cell the intensity is the linear interpolant of its endpoint
    values and the dominating rate is ``majorant_factor`` times the larger
    endpoint value.
    """
    lam_path = np.atleast_2d(np.asarray(lam_path, dtype=float))
    if not np.all(lam_path > 0):
        raise ValueError("intensity path must be strictly positive")
    if majorant_factor < 1:
        raise ValueError("majorant factor must be at least 1")
    n = lam_path.shape[0]

    def work(c: _mc.Chunk):
        r, cell, tm, mk = _thin_chunk(
            lam_path[c.start : c.start + c.size], grid, claims,
            _mc.rng(seed, c.index, _mc.ARRIVALS), _mc.rng(seed, c.index, _mc.MARKS),
            majorant_factor,
        )
        return r + c.start, cell, tm, mk

    parts = _mc.run_chunked(work, n, chunk_size, threads)
    cat = lambda i, dt: np.concatenate([p[i] for p in parts]).astype(dt) if parts else np.empty(0, dt)
    return ClaimEvents(cat(0, np.int64), cat(1, np.int64), cat(2, float), cat(3, float), n)


@dataclass(frozen=True)
class PathBundle:
    """Joint trajectories of the factor, intensity, asset and claims."""

    grid: SimGrid
    y: np.ndarray
    lam: np.ndarray
    p: np.ndarray
    dW_asset: np.ndarray
    events: ClaimEvents
    seed: int
    measure: str

    @property
    def n_reps(self) -> int:
        return self.y.shape[0]

    def to_csv(self, path_file, events_file, max_reps: int | None = None) -> None:
        """Write ``(replication, t, Y, lambda, P)`` and ``(replication, time, mark)`` CSVs."""
        n = self.n_reps if max_reps is None else min(max_reps, self.n_reps)
        t = self.grid.times
        with open(path_file, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "t", "Y", "lambda", "P"])
            for r in range(n):
                for i in range(t.size):
                    w.writerow([r, repr(float(t[i])), repr(float(self.y[r, i])),
                                repr(float(self.lam[r, i])), repr(float(self.p[r, i]))])
        with open(events_file, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "time", "mark"])
            sel = self.events.rep < n
            for r, tm, mk in zip(self.events.rep[sel], self.events.time[sel], self.events.mark[sel]):
                w.writerow([int(r), repr(float(tm)), repr(float(mk))])


def simulate_chunk(
    factor: FactorModel,
    market: MarketModel,
    claims: ClaimModel,
    grid: SimGrid,
    seed: int,
    chunk: _mc.Chunk,
    measure: str = "physical",
) -> PathBundle:
    """All processes for one chunk of replications; event indices are chunk-local."""
    dWy = _normals(_mc.rng(seed, chunk.index, _mc.FACTOR), chunk.size, grid)
    y = euler_factor(factor, grid, dWy)
    lam = factor.lam(grid.times, y)
    if not np.all(lam > 0):
        raise NonFiniteState("intensity path is not strictly positive")
    dWp = _normals(_mc.rng(seed, chunk.index, _mc.ASSET), chunk.size, grid)
    p = euler_log_asset(market, grid, dWp, measure=measure)
    rep, cell, tm, mk = _thin_chunk(lam, grid, claims, _mc.rng(seed, chunk.index, _mc.ARRIVALS),
                                    _mc.rng(seed, chunk.index, _mc.MARKS), MAJORANT_FACTOR)
    events = ClaimEvents(rep.astype(np.int64), cell.astype(np.int64), tm, mk, chunk.size)
    return PathBundle(grid, y, lam, p, dWp, events, seed, measure)


def simulate_paths(
    factor: FactorModel,
    market: MarketModel,
    claims: ClaimModel,
    grid: SimGrid,
    seed: int,
    n_reps: int,
    measure: str = "physical",
    chunk_size: int = _mc.DEFAULT_CHUNK,
    threads: int = 1,
) -> PathBundle:
    """Simulate every process for ``n_reps`` replications with independent streams."""
    parts = _mc.run_chunked(
        lambda c: (c, simulate_chunk(factor, market, claims, grid, seed, c, measure)),
        n_reps, chunk_size, threads,
    )
    stack = lambda name: np.concatenate([getattr(b, name) for _, b in parts])
    events = ClaimEvents(
        np.concatenate([b.events.rep + c.start for c, b in parts]).astype(np.int64),
        np.concatenate([b.events.cell for _, b in parts]).astype(np.int64),
        np.concatenate([b.events.time for _, b in parts]),
        np.concatenate([b.events.mark for _, b in parts]),
        n_reps,
    )
    return PathBundle(grid, stack("y"), stack("lam"), stack("p"), stack("dW_asset"), events, seed, measure)
