"""Runtime checks of the modelling hypotheses on deterministic probe grids.

Each check reports ``pass``, ``warn`` or ``fail``; nothing here raises.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConcavityViolated, DivergentMoment, QuadratureFailure
from .models import Constant, ExpAffine, weighted_moment
from .reinsurance import exponential_guard_margin

__all__ = ["Check", "ValidationReport", "validate_assumptions", "FATAL_CHECKS"]

PROBE_N = 21
PROBE_U = np.linspace(0.0, 1.0, 11)

# failures of these make every downstream computation meaningless
FATAL_CHECKS = ("exponential_moments", "concavity")


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    detail: str
    value: float | None = None


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name, ok, detail, value=None, warn=False):
        status = "pass" if ok else ("warn" if warn else "fail")
        self.checks.append(Check(name, status, detail, None if value is None else float(value)))

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status == "fail"]

    @property
    def fatal(self) -> list[Check]:
        return [c for c in self.failures if c.name in FATAL_CHECKS]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        d = self.to_dict()
        for c in d["checks"]:
            c["value"] = clean(c["value"])
        return json.dumps(d, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"[{c.status.upper():4s}] {c.name}: {c.detail}" for c in self.checks]
        lines.append("overall: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)


def _lipschitz(fn, t, x):
    """Largest finite-difference slope of ``fn(t, .)`` along ``x`` on the grid."""
    v = fn(t, x)
    dx = np.diff(x, axis=1)
    return float(np.max(np.abs(np.diff(v, axis=1)) / dx))


def validate_assumptions(scenario, y_bounds: tuple[float, float] | None = None,
                         closed_forms: bool | None = None) -> ValidationReport:
    """Run every hypothesis check on a 21 x 21 (t, y) probe grid."""
    rep = ValidationReport()
    fac, mkt, claims, prefs = scenario.factor, scenario.market, scenario.claims, scenario.prefs
    pr, ins = scenario.principle, scenario.insurance
    T, R, eta = prefs.horizon, mkt.rate, prefs.eta
    closed_forms = scenario.closed_forms if closed_forms is None else closed_forms
    lo, hi = y_bounds if y_bounds is not None else (fac.y0 - 4.0, fac.y0 + 4.0)
    tt, yy = np.meshgrid(np.linspace(0.0, T, PROBE_N), np.linspace(lo, hi, PROBE_N), indexing="ij")

    # exponential moments at the largest weight η e^{RT}
    c_top = eta * math.exp(R * T)
    try:
        vals = [weighted_moment(claims, c_top, k) for k in (0, 1, 2)]
        ok = all(math.isfinite(v) for v in vals)
        rep.add("exponential_moments", ok, f"E[Z^k e^(cZ)] at c={c_top:.6g}: {vals}", max(vals))
    except DivergentMoment as exc:
        rep.add("exponential_moments", False, f"DivergentMoment: {exc}")
    except QuadratureFailure as exc:
        rep.add("exponential_moments", False, f"QuadratureFailure: {exc}")

    uu = PROBE_U[None, None, :]
    t3, y3 = tt[..., None], yy[..., None]
    q = pr.q(t3, y3, uu)
    c = ins.c(tt, yy)
    k_bound = float(np.max(np.abs(q - c[..., None])))
    rep.add("premium_bound", math.isfinite(k_bound), f"empirical K = max|q - c| = {k_bound:.6g}", k_bound)

    q0 = float(np.max(np.abs(pr.q(tt, yy, np.zeros_like(tt)))))
    rep.add("null_protection_free", q0 == 0.0, f"max |q(t,y,0)| = {q0:.3g}", q0)

    dq_min = float(np.min(pr.dq_du(t3, y3, uu)))
    rep.add("premium_increasing", dq_min >= 0.0, f"min dq/du = {dq_min:.6g}", dq_min)

    gap = float(np.min(pr.q(tt, yy, np.ones_like(tt)) - c))
    rep.add("full_cover_dearer", gap > 0.0, f"min q(t,y,1) - c(t,y) = {gap:.6g}", gap)

    profit = float(np.min(c - claims.mean * fac.lam(tt, yy)))
    rep.add("net_profit", profit > 0.0, f"min c - E[Z] lambda = {profit:.6g}", profit)

    if closed_forms:
        applicable = claims.kind == "exponential" and not claims.truncated
        if applicable:
            margin = exponential_guard_margin(claims.rate, eta, R, T)
            rep.add("exponential_guard", margin > 0, f"zeta/eta - e^(RT) = {margin:.6g}", margin)
        else:
            rep.add("exponential_guard", False, "closed forms need untruncated exponential claims")

    try:
        certs = set()
        prob = scenario.reinsurance
        for ti, yi in zip(tt[::5, ::5].ravel(), yy[::5, ::5].ravel()):
            certs.add(prob.concavity_certificate(float(ti), float(yi)).condition)
        rep.add("concavity", True, f"certified by {sorted(certs)}")
    except ConcavityViolated as exc:
        rep.add("concavity", False, str(exc))
    except (DivergentMoment, QuadratureFailure) as exc:
        rep.add("concavity", False, f"could not evaluate: {exc}")

    # regularity probes: diagnostics, never fatal
    lam = fac.intensity
    bounded = isinstance(lam, Constant) or (isinstance(lam, ExpAffine) and lam.rate == 0)
    lam_max = float(np.max(fac.lam(tt, yy)))
    rep.add("intensity_bounded", bounded,
            "bounded" if bounded else f"unbounded in y (max on probe grid {lam_max:.6g})", lam_max, warn=True)
    g2 = float(np.min(fac.gamma(tt, yy) ** 2))
    rep.add("factor_nondegenerate", g2 > 0.0, f"min gamma^2 = {g2:.6g}", g2, warn=True)
    p_probe = np.geomspace(mkt.p0 * 1e-4, mkt.p0 * 5.0, PROBE_N)
    tp, pp = np.meshgrid(np.linspace(0.0, T, PROBE_N), p_probe, indexing="ij")
    sig_min = float(np.min(mkt.sigma(tp, pp)))
    tight = mkt.kind == "cev" and mkt.volatility.exponent > 0
    rep.add("sigma_lower_bound", sig_min > 0 and not tight,
            f"min sigma = {sig_min:.6g} down to p = {p_probe[0]:.3g}"
            + (" (sigma p^beta -> 0 as p -> 0)" if tight else ""), sig_min, warn=True)
    lip_b = _lipschitz(fac.b, tt, yy)
    lip_g = _lipschitz(fac.gamma, tt, yy)
    rep.add("factor_lipschitz", math.isfinite(lip_b) and math.isfinite(lip_g),
            f"slopes |db/dy| <= {lip_b:.6g}, |dgamma/dy| <= {lip_g:.6g}", max(lip_b, lip_g), warn=True)
    return rep
