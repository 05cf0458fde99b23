"""Optimal proportional reinsurance.

The insurer maximises, pointwise in ``(t, y)``,

    Ψ^u = -a q(t, y, u) + λ(t, y) (1 - E[exp(a (1 - u) Z)]),   a = η e^{R(T-t)},

over ``u`` in [0, 1].  When Ψ^u is strictly concave the maximiser is 0, 1 or
the root of the first-order condition ``∂q/∂u = λ E[Z e^{a(1-u)Z}]``.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConcavityViolated, GuardViolated, RootBracketFailure
from .models import ClaimModel, FactorModel, RiskPreferences, weighted_moment
from .premium import PremiumPrinciple, PrincipleKind

log = logging.getLogger(__name__)

__all__ = [
    "Region",
    "ConcavityCertificate",
    "ReinsuranceSolution",
    "ReinsuranceProblem",
    "StrategySurface",
    "ClosedForm",
    "closed_form_exponential",
    "exponential_guard_margin",
]

U_TOL = 1e-10
N_CONCAVITY_PROBES = 11


class Region(str, enum.Enum):
    A0 = "A0"
    INTERIOR = "interior"
    A1 = "A1"


@dataclass(frozen=True)
class ConcavityCertificate:
    """Which sufficient condition established strict concavity in ``u``.

    ``condition`` is one of ``"dq0_zero"``, ``"convex_premium"``,
    ``"curvature_bound"`` or ``"direct"`` (sign of ∂²Ψ/∂u² at interior probes).
    """

    condition: str
    max_second_derivative: float = math.nan


@dataclass(frozen=True)
class ReinsuranceSolution:
    u_star: float
    region: Region
    residual: float
    certificate: ConcavityCertificate


def _probe_u() -> np.ndarray:
    return np.linspace(0.0, 1.0, N_CONCAVITY_PROBES + 2)[1:-1]


@dataclass(frozen=True)
class ReinsuranceProblem:
    """Pointwise reinsurance problem for a premium principle and preferences."""

    principle: PremiumPrinciple
    prefs: RiskPreferences
    rate: float

    @property
    def claims(self) -> ClaimModel:
        return self.principle.claims

    @property
    def factor(self) -> FactorModel:
        return self.principle.factor

    def a(self, t):
        return self.prefs.discount_weight(self.rate, t)

    def _moment(self, c, k):
        if np.ndim(c) == 0:
            return weighted_moment(self.claims, float(c), k)
        return self.claims.moment_array(c, k)

    # objective and derivatives ---------------------------------------------

    def psi_u(self, t, y, u):
        """Ψ^u(t, y)."""
        a, lam = self.a(t), self.factor.lam(t, y)
        c = a * (1.0 - np.asarray(u, float))
        return -a * self.principle.q(t, y, u) + lam * (1.0 - self._moment(c, 0))

    def dpsi_du(self, t, y, u):
        a, lam = self.a(t), self.factor.lam(t, y)
        c = a * (1.0 - np.asarray(u, float))
        return -a * (self.principle.dq_du(t, y, u) - lam * self._moment(c, 1))

    def d2psi_du2(self, t, y, u):
        a, lam = self.a(t), self.factor.lam(t, y)
        c = a * (1.0 - np.asarray(u, float))
        return -a * (self.principle.d2q_du2(t, y, u) + a * lam * self._moment(c, 2))

    def foc_residual(self, t, y, u):
        """``(∂q/∂u - λ E[Z e^{a(1-u)Z}]) / (λ E[Z])``, dimensionless."""
        a, lam = self.a(t), self.factor.lam(t, y)
        c = a * (1.0 - np.asarray(u, float))
        return (self.principle.dq_du(t, y, u) - lam * self._moment(c, 1)) / (lam * self.claims.mean)

    # concavity, regions, optimum ------------------------------------------

    def concavity_certificate(self, t: float, y: float) -> ConcavityCertificate:
        """Certify strict concavity of ``u -> Ψ^u(t, y)`` on (0, 1).

        Tries the three sufficient conditions on the premium first, then the
        sign of ∂²Ψ/∂u² at 11 interior points.

        Raises:
            ConcavityViolated: none of the checks holds.
        """
        pr = self.principle
        u = _probe_u()
        if float(pr.dq_du(t, y, 0.0)) == 0.0:
            return ConcavityCertificate("dq0_zero")
        d2q = np.asarray(pr.d2q_du2(t, y, u), float)
        if np.all(d2q >= 0):
            return ConcavityCertificate("convex_premium")
        lam = float(self.factor.lam(t, y))
        if np.all(-d2q < self.prefs.eta * lam * self.claims.second_moment):
            return ConcavityCertificate("curvature_bound")
        d2 = np.asarray(self.d2psi_du2(np.full_like(u, t), np.full_like(u, y), u))
        if np.all(d2 < 0):
            return ConcavityCertificate("direct", float(d2.max()))
        raise ConcavityViolated(f"Ψ^u is not strictly concave in u at (t={t}, y={y})")

    def classify_region(self, t: float, y: float) -> Region:
        """A0 if ``λ E[Z e^{aZ}] <= ∂q(0)/∂u``; A1 if ``∂q(1)/∂u <= E[Z] λ``; else interior."""
        self.concavity_certificate(t, y)
        return Region(self._regions(np.asarray(t, float), np.asarray(y, float), scalar=True).item())

    def _regions(self, t, y, scalar=False):
        lam = self.factor.lam(t, y)
        a = self.a(t)
        m1 = self._moment(float(a), 1) if scalar else self._moment(np.broadcast_to(a, lam.shape), 1)
        a0 = lam * m1 <= self.principle.dq_du(t, y, 0.0)
        a1 = self.principle.dq_du(t, y, 1.0) <= self.claims.mean * lam
        out = np.where(a0, Region.A0.value, np.where(a1, Region.A1.value, Region.INTERIOR.value))
        return out

    def optimal_u(self, t: float, y: float) -> ReinsuranceSolution:
        """Optimal retention at one point, interior roots by bisection to 1e-10."""
        cert = self.concavity_certificate(t, y)
        region = self.classify_region(t, y)
        if region is Region.A0:
            return ReinsuranceSolution(0.0, region, float(self.foc_residual(t, y, 0.0)), cert)
        if region is Region.A1:
            return ReinsuranceSolution(1.0, region, float(self.foc_residual(t, y, 1.0)), cert)
        lo, hi = 0.0, 1.0
        g_lo, g_hi = float(self.dpsi_du(t, y, lo)), float(self.dpsi_du(t, y, hi))
        if not (g_lo > 0 > g_hi):
            raise RootBracketFailure(f"first-order condition not bracketed at (t={t}, y={y})")
        while hi - lo > U_TOL:
            mid = 0.5 * (lo + hi)
            if self.dpsi_du(t, y, mid) > 0:
                lo = mid
            else:
                hi = mid
        u = 0.5 * (lo + hi)
        return ReinsuranceSolution(u, region, float(self.foc_residual(t, y, u)), cert)

    def optimal_u_array(self, t, y):
        """Vectorised optimum: returns ``(u_star, region, residual)`` arrays.

        Uses the certified quadrature rule for the weighted moments and the
        same region tests and bisection tolerance as :meth:`optimal_u`.
        Concavity is certified for the premium; principles whose premium is
        not convex are checked point by point.
        """
        t, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(y, float))
        shape = t.shape
        t, y = t.ravel(), y.ravel()
        if not self.principle.convex:
            for ti, yi in zip(t, y):
                self.concavity_certificate(float(ti), float(yi))
        region = self._regions(t, y)
        interior = region == Region.INTERIOR.value
        u = np.where(region == Region.A1.value, 1.0, 0.0)
        if np.any(interior):
            ti, yi = t[interior], y[interior]
            lo, hi = np.zeros(ti.size), np.ones(ti.size)
            g_lo, g_hi = self.dpsi_du(ti, yi, lo), self.dpsi_du(ti, yi, hi)
            if not (np.all(g_lo > 0) and np.all(g_hi < 0)):
                raise RootBracketFailure("first-order condition not bracketed on part of the grid")
            while np.max(hi - lo) > U_TOL:
                mid = 0.5 * (lo + hi)
                up = self.dpsi_du(ti, yi, mid) > 0
                lo = np.where(up, mid, lo)
                hi = np.where(up, hi, mid)
            u[interior] = 0.5 * (lo + hi)
        residual = self.foc_residual(t, y, u)
        return u.reshape(shape), region.reshape(shape), residual.reshape(shape)

    def surface(self, t_nodes, y_nodes) -> "StrategySurface":
        """Tabulate ``u*`` and ``Ψ*`` on a (t, y) grid."""
        t_nodes = np.asarray(t_nodes, float)
        y_nodes = np.asarray(y_nodes, float)
        tt, yy = np.meshgrid(t_nodes, y_nodes, indexing="ij")
        u, region, _ = self.optimal_u_array(tt, yy)
        psi = self.psi_u(tt, yy, u)
        lam = self.factor.lam(tt, yy)
        return StrategySurface(t_nodes, y_nodes, u, region, psi, lam)


def _bilinear(xn, yn, table, x, y):
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    x = np.clip(x, xn[0], xn[-1])
    y = np.clip(y, yn[0], yn[-1])
    i = np.clip(np.searchsorted(xn, x, side="right") - 1, 0, xn.size - 2)
    j = np.clip(np.searchsorted(yn, y, side="right") - 1, 0, yn.size - 2)
    fx = (x - xn[i]) / (xn[i + 1] - xn[i])
    fy = (y - yn[j]) / (yn[j + 1] - yn[j])
    return (
        table[i, j] * (1 - fx) * (1 - fy)
        + table[i + 1, j] * fx * (1 - fy)
        + table[i, j + 1] * (1 - fx) * fy
        + table[i + 1, j + 1] * fx * fy
    )


@dataclass(frozen=True)
class StrategySurface:
    """Optimal retention and optimal Ψ on a (t, y) grid, bilinearly interpolated.

    Queries outside the grid are clamped to its edge.
    """

    t: np.ndarray
    y: np.ndarray
    u_star: np.ndarray
    region: np.ndarray
    psi_star: np.ndarray
    lam: np.ndarray

    def u(self, t, y):
        return np.clip(_bilinear(self.t, self.y, self.u_star, t, y), 0.0, 1.0)

    def psi(self, t, y):
        return _bilinear(self.t, self.y, self.psi_star, t, y)

    def to_csv(self, path) -> None:
        """Columns ``t, y, lambda, region, u_star``."""
        from .io import fmt

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "lambda", "region", "u_star"])
            for i, ti in enumerate(self.t):
                for j, yj in enumerate(self.y):
                    w.writerow([fmt(ti), fmt(yj), fmt(self.lam[i, j]), self.region[i, j], fmt(self.u_star[i, j])])


# ---------------------------------------------------------------------------
# Exponential claims


@dataclass(frozen=True)
class ClosedForm:
    u_star: np.ndarray
    t0: float | None = None


def exponential_guard_margin(zeta: float, eta: float, rate: float, horizon: float) -> float:
    """``ζ/η - e^{RT}``; the exponential closed forms need it positive."""
    return zeta / eta - math.exp(rate * horizon)


def closed_form_exponential(
    kind,
    t,
    lam=0.0,
    *,
    zeta: float,
    eta: float,
    rate: float,
    horizon: float,
    theta_r: float,
) -> ClosedForm:
    """Published explicit retentions for untruncated exponential claims.

    * ``evp``: ``1 - K e^{-R(T-t)}`` before ``t0 = T - ln(K)/R`` and 0 after,
      with ``K = (ζ/η)(1 - 1/sqrt(1+θ))``.
    * ``vp``: ``1 - (ζ/η)(1 - sqrt(ζ/(ζ+4θ))) e^{-R(T-t)}``.
    * ``iavp``: as ``vp`` with ``4θ`` replaced by ``4θ(1 + Tλ)``.

    Raises:
        GuardViolated: ``ζ/η <= e^{RT}``.
    """
    kind = PrincipleKind(kind)
    margin = exponential_guard_margin(zeta, eta, rate, horizon)
    if not margin > 0:
        raise GuardViolated(f"zeta/eta = {zeta / eta:.6g} <= e^(RT) = {math.exp(rate * horizon):.6g}")
    t = np.asarray(t, float)
    disc = np.exp(-rate * (horizon - t))
    if kind is PrincipleKind.EVP:
        k = (zeta / eta) * (1.0 - 1.0 / math.sqrt(1.0 + theta_r))
        t0 = horizon - math.log(k) / rate
        # zero retention from t0 on; when t0 > T the point t = T keeps the
        # continuous value, which is what the first-order condition gives
        u = np.maximum(1.0 - k * disc, 0.0)
        return ClosedForm(u, t0)
    if kind is PrincipleKind.VP:
        load = 4.0 * theta_r
    elif kind is PrincipleKind.IAVP:
        load = 4.0 * theta_r * (1.0 + horizon * np.asarray(lam, float))
    else:
        raise ValueError("closed forms exist only for evp, vp and iavp")
    u = 1.0 - (zeta / eta) * (1.0 - np.sqrt(zeta / (zeta + load))) * disc
    return ClosedForm(u)
