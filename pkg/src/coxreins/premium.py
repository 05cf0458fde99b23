"""Insurance and reinsurance premium principles.

Every principle exposes ``q(t, y, u)`` together with its first and second
derivatives in ``u``.  All three are vectorised over numpy arrays.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import _mc
from .errors import InsufficientReplications
from .models import ClaimModel, FactorModel

log = logging.getLogger(__name__)

__all__ = [
    "PrincipleKind",
    "PremiumTable",
    "PremiumPrinciple",
    "InsurancePremium",
    "DominanceReport",
    "iavp_dominance_check",
]


class PrincipleKind(str, enum.Enum):
    EVP = "evp"
    VP = "vp"
    IAVP = "iavp"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PremiumTable:
    """Tabulated custom premium over a ``(y, u)`` grid, bicubic-interpolated.

    ``q``, ``dq_du`` and ``d2q_du2`` have shape ``(len(y), len(u))``.  The
    supplied derivatives are checked against finite differences of ``q`` at
    construction (relative tolerance ``fd_rtol`` of the table's scale).
    """

    y: np.ndarray
    u: np.ndarray
    q: np.ndarray
    dq_du: np.ndarray
    d2q_du2: np.ndarray
    fd_rtol: float = 1e-2
    _splines: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y, u = np.asarray(self.y, float), np.asarray(self.u, float)
        tabs = [np.asarray(a, float) for a in (self.q, self.dq_du, self.d2q_du2)]
        if y.size < 4 or u.size < 4:
            raise ValueError("bicubic tables need at least 4 nodes per axis")
        if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("u nodes must increase from 0 to 1 and y nodes must increase")
        for a in tabs:
            if a.shape != (y.size, u.size):
                raise ValueError("table shapes must be (len(y), len(u))")
        q, d1, d2 = tabs
        fd1 = np.gradient(q, u, axis=1, edge_order=2)
        fd2 = np.gradient(d1, u, axis=1, edge_order=2)
        for name, given, fd in (("dq_du", d1, fd1), ("d2q_du2", d2, fd2)):
            scale = max(np.max(np.abs(given)), 1e-300)
            err = np.max(np.abs(given - fd)) / scale
            if err > self.fd_rtol:
                raise ValueError(f"custom {name} disagrees with finite differences of q ({err:.2e})")
        splines = tuple(RectBivariateSpline(y, u, a, kx=3, ky=3, s=0) for a in tabs)
        for name, a in zip(("y", "u", "q", "dq_du", "d2q_du2"), (y, u, q, d1, d2)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "_splines", splines)

    def eval(self, which: int, y, u):
        y, u = np.broadcast_arrays(np.asarray(y, float), np.asarray(u, float))
        y = np.clip(y, self.y[0], self.y[-1])
        out = self._splines[which].ev(y.ravel(), u.ravel()).reshape(y.shape)
        return out


@dataclass(frozen=True)
class PremiumPrinciple:
    """Reinsurance premium rate ``q(t, y, u)``.

    * ``evp``:  ``(1 + θ) E[Z] λ u``
    * ``vp``:   ``E[Z] λ u + θ E[Z²] λ u²``
    * ``iavp``: ``E[Z] λ u + θ E[Z²] (λ + T λ²) u²``
    * ``custom``: bicubic interpolation of a :class:`PremiumTable`
    """

    kind: PrincipleKind
    theta_r: float
    claims: ClaimModel
    factor: FactorModel
    horizon: float
    table: PremiumTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PrincipleKind(self.kind))
        if self.kind is PrincipleKind.CUSTOM:
            if self.table is None:
                raise ValueError("custom principle requires a premium table")
        elif not self.theta_r >= 0:
            raise ValueError("theta_r must be nonnegative")
        if self.kind is not PrincipleKind.CUSTOM and self.kind is not PrincipleKind.EVP:
            if not np.isfinite(self.claims.second_moment):
                raise ValueError("variance principles need a finite E[Z^2]")

    # λ-dependent coefficients:  q = A(λ) u + B(λ) u²
    def _coeffs(self, lam):
        m1, m2, th = self.claims.mean, self.claims.second_moment, self.theta_r
        if self.kind is PrincipleKind.EVP:
            return (1.0 + th) * m1 * lam, 0.0 * lam
        if self.kind is PrincipleKind.VP:
            return m1 * lam, th * m2 * lam
        return m1 * lam, th * m2 * (lam + self.horizon * lam**2)

    def q(self, t, y, u):
        if self.kind is PrincipleKind.CUSTOM:
            return self.table.eval(0, y, u)
        a, b = self._coeffs(self.factor.lam(t, y))
        u = np.asarray(u, float)
        return a * u + b * u**2

    def dq_du(self, t, y, u):
        if self.kind is PrincipleKind.CUSTOM:
            return self.table.eval(1, y, u)
        a, b = self._coeffs(self.factor.lam(t, y))
        return a + 2.0 * b * np.asarray(u, float)

    def d2q_du2(self, t, y, u):
        if self.kind is PrincipleKind.CUSTOM:
            return self.table.eval(2, y, u)
        a, b = self._coeffs(self.factor.lam(t, y))
        return 2.0 * b + 0.0 * np.asarray(u, float)

    @property
    def convex(self) -> bool:
        """``d2q/du2 >= 0`` everywhere (known for built-ins, tabulated for custom)."""
        if self.kind is PrincipleKind.CUSTOM:
            return bool(np.all(self.table.d2q_du2 >= 0))
        return True

    @property
    def factorizes(self) -> bool:
        """Whether ``q / λ`` is free of ``y``."""
        return self.kind in (PrincipleKind.EVP, PrincipleKind.VP)

    def with_theta(self, theta_r: float) -> "PremiumPrinciple":
        return PremiumPrinciple(self.kind, theta_r, self.claims, self.factor, self.horizon, self.table)


@dataclass(frozen=True)
class InsurancePremium:
    """Expected-value insurance premium ``c = (1 + θ_i) E[Z] λ(t, y)``."""

    theta_i: float
    claims: ClaimModel
    factor: FactorModel

    def __post_init__(self):
        if not self.theta_i > 0:
            raise ValueError("insurer loading theta_i must be positive (net-profit condition)")

    def c(self, t, y):
        return (1.0 + self.theta_i) * self.claims.mean * self.factor.lam(t, y)


@dataclass(frozen=True)
class DominanceReport:
    lhs: float
    se_lhs: float
    rhs: float
    se_rhs: float
    diff: float
    se_diff: float
    holds: bool
    n_reps: int
    seed: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def ceded_paths(u_map, principle: PremiumPrinciple, grid, y, events):
    """Per replication: ``∫ q(s, Y_s, u_s) ds`` (trapezoid) and ``∫ u dC``.

    The retention applied to a claim is ``u`` at the left node of its cell.
    """
    t = grid.times
    u = np.clip(u_map(t, y), 0.0, 1.0)
    q = principle.q(t, y, u)
    premium = _mc.trapezoid(q, grid.dt)
    if len(events):
        u_claim = u[events.rep, events.cell]
        ceded = events.per_rep_sum(u_claim * events.mark)
    else:
        ceded = np.zeros(y.shape[0])
    return premium, ceded


def iavp_dominance_check(u_map, scenario, n_reps: int, seed: int, chunk_size: int = _mc.DEFAULT_CHUNK,
                         threads: int = 1) -> DominanceReport:
    """Check ``E[∫ q ds] >= E[∫ u dC] + θ Var[∫ u dC]`` by Monte Carlo.

    Both sides use the same simulated paths.  The standard error of the
    variance-based side uses its influence function
    ``(A - m) + θ((A - m)² - v)``.

    Raises:
        InsufficientReplications: SE of the right-hand side exceeds 10% of it.
    """
    from .paths import simulate_factor, simulate_claims

    principle = scenario.principle
    grid = scenario.grid
    y, lam = simulate_factor(scenario.factor, grid, seed, n_reps, chunk_size, threads)
    events = simulate_claims(lam, scenario.claims, grid, seed, chunk_size, threads)
    lhs_s, a = ceded_paths(u_map, principle, grid, y, events)
    m, v = a.mean(), a.var(ddof=1) if a.size > 1 else 0.0
    rhs = m + principle.theta_r * v
    infl_r = (a - m) + principle.theta_r * ((a - m) ** 2 - v)
    infl_l = lhs_s - lhs_s.mean()
    n = a.size
    se = lambda x: float(np.std(x, ddof=1) / np.sqrt(n))
    se_lhs, se_rhs, se_diff = se(infl_l), se(infl_r), se(infl_l - infl_r)
    if rhs > 0 and se_rhs > 0.1 * rhs:
        raise InsufficientReplications(
            f"SE of the ceded-risk side is {se_rhs:.3g} > 10% of {rhs:.3g}; increase n_reps"
        )
    lhs = float(lhs_s.mean())
    diff = lhs - float(rhs)
    return DominanceReport(lhs, se_lhs, float(rhs), se_rhs, diff, se_diff,
                           bool(diff >= -3.0 * se_diff), n, seed)
