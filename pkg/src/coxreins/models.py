"""Coefficient functions, model parameters and claim-size moment functionals.

Everything here is immutable.  Coefficient functions are small named
callables ``f(t, x)`` that broadcast over numpy arrays, so the same object can
be evaluated at a single point, along a simulated path, or on a probe grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DivergentMoment, QuadratureFailure

__all__ = [
    "Constant",
    "Affine",
    "ExpAffine",
    "Power",
    "FactorModel",
    "MarketModel",
    "ClaimModel",
    "RiskPreferences",
    "weighted_moment",
]

MOMENT_RTOL = 1e-10
DEFAULT_TRUNCATION_QUANTILE = 0.9999
CHEB_MIN_SIZE = 2048


def _broadcast(t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.broadcast_arrays(t, x)


# ---------------------------------------------------------------------------
# Built-in coefficient functions


@dataclass(frozen=True)
class Constant:
    """``f(t, x) = value``."""

    value: float

    def __call__(self, t, x):
        t, x = _broadcast(t, x)
        return np.full(x.shape, float(self.value))


@dataclass(frozen=True)
class Affine:
    """``f(t, x) = intercept + slope * x``."""

    intercept: float
    slope: float

    def __call__(self, t, x):
        t, x = _broadcast(t, x)
        return self.intercept + self.slope * x


@dataclass(frozen=True)
class ExpAffine:
    """``f(t, x) = scale * exp(rate * x)``; the intensity ``λ0 e^{y/2}`` is
    ``ExpAffine(λ0, 0.5)``."""

    scale: float
    rate: float

    def __call__(self, t, x):
        t, x = _broadcast(t, x)
        return self.scale * np.exp(self.rate * x)


@dataclass(frozen=True)
class Power:
    """``f(t, x) = scale * x**exponent`` (CEV volatility)."""

    scale: float
    exponent: float

    def __call__(self, t, x):
        t, x = _broadcast(t, x)
        return self.scale * np.power(x, self.exponent)


BUILTIN_COEFFICIENTS = (Constant, Affine, ExpAffine, Power)

Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Factor and market


@dataclass(frozen=True)
class FactorModel:
    """Diffusion factor ``dY = b(t,Y)dt + γ(t,Y)dW`` and claim intensity
    ``λ(t, y) > 0``."""

    drift: Coefficient
    diffusion: Coefficient
    y0: float
    intensity: Coefficient

    def __post_init__(self):
        lam = self.intensity
        if isinstance(lam, Constant) and not lam.value > 0:
            raise ValueError("constant intensity must be strictly positive")
        if isinstance(lam, ExpAffine) and not lam.scale > 0:
            raise ValueError("intensity scale must be strictly positive")
        if isinstance(lam, (Affine, Power)):
            raise ValueError("intensity must be Constant or ExpAffine (positivity)")

    def b(self, t, y):
        return self.drift(t, y)

    def gamma(self, t, y):
        return self.diffusion(t, y)

    def lam(self, t, y):
        return self.intensity(t, y)

    @property
    def intensity_bounded(self) -> bool:
        lam = self.intensity
        return isinstance(lam, Constant) or (isinstance(lam, ExpAffine) and lam.rate == 0)


@dataclass(frozen=True)
class MarketModel:
    """Bond with rate ``R`` and risky asset ``dP = P[μ(t,P)dt + σ(t,P)dW]``."""

    rate: float
    drift: Coefficient
    volatility: Coefficient
    p0: float
    kind: str = "custom"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("risk-free rate R must be positive")
        if not self.p0 > 0:
            raise ValueError("initial price P0 must be positive")
        if self.kind not in ("constant", "cev", "custom"):
            raise ValueError(f"unknown market kind {self.kind!r}")
        if self.kind == "cev" and not isinstance(self.volatility, Power):
            raise ValueError("CEV market requires a Power volatility sigma * p**beta")
        if self.kind == "constant" and not isinstance(self.volatility, Constant):
            raise ValueError("constant market requires a Constant volatility")

    @classmethod
    def constant(cls, mu: float, sigma: float, rate: float, p0: float = 1.0) -> "MarketModel":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return cls(rate, Constant(mu), Constant(sigma), p0, "constant")

    @classmethod
    def cev(cls, mu: float, sigma: float, beta: float, rate: float, p0: float = 1.0) -> "MarketModel":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return cls(rate, Constant(mu), Power(sigma, beta), p0, "cev")

    def mu(self, t, p):
        return self.drift(t, p)

    def sigma(self, t, p):
        return self.volatility(t, p)

    @property
    def time_homogeneous(self) -> bool:
        return all(isinstance(f, BUILTIN_COEFFICIENTS) for f in (self.drift, self.volatility))

    def sharpe_sq(self, t, p):
        """Squared market price of risk ``((μ - R)/σ)^2``."""
        return ((self.mu(t, p) - self.rate) / self.sigma(t, p)) ** 2


@dataclass(frozen=True)
class RiskPreferences:
    """CARA risk aversion ``η`` and horizon ``T``."""

    eta: float
    horizon: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("risk aversion eta must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon T must be positive")

    def discount_weight(self, rate: float, t):
        """``η e^{R(T - t)}``, the effective risk aversion on wealth held at t."""
        return self.eta * np.exp(rate * (self.horizon - np.asarray(t, dtype=float)))


# ---------------------------------------------------------------------------
# Claim sizes


@dataclass(frozen=True)
class ClaimModel:
    """Claim-size law, optionally truncated at ``D``.

    ``pareto`` is the Pareto type II (Lomax) law with survival function
    ``(scale / (z + scale))**shape`` on ``[0, inf)``.  Truncated laws are the
    conditional law given ``Z <= D`` so that ``F_Z(D) = 1``.  Use the
    constructors rather than the raw fields.
    """

    kind: str
    rate: float = math.nan
    shape: float = math.nan
    scale: float = math.nan
    values: tuple = ()
    weights: tuple = ()
    truncation: float = math.inf
    mean: float = field(init=False)
    second_moment: float = field(init=False)

    def __post_init__(self):
        if self.kind == "exponential":
            if not self.rate > 0:
                raise ValueError("exponential rate must be positive")
        elif self.kind == "pareto":
            if not (self.shape > 0 and self.scale > 0):
                raise ValueError("pareto shape and scale must be positive")
        elif self.kind == "empirical":
            if len(self.values) == 0 or min(self.values) < 0:
                raise ValueError("empirical claims need nonnegative values")
            if len(self.weights) != len(self.values):
                raise ValueError("weights and values differ in length")
        else:
            raise ValueError(f"unknown claim distribution {self.kind!r}")
        if not self.truncation > 0:
            raise ValueError("truncation bound must be positive")
        object.__setattr__(self, "mean", self._plain_moment(1))
        object.__setattr__(self, "second_moment", self._plain_moment(2))

    # constructors -----------------------------------------------------------

    @classmethod
    def exponential(cls, rate: float, truncation: float = math.inf) -> "ClaimModel":
        return cls("exponential", rate=float(rate), truncation=float(truncation))

    @classmethod
    def pareto(cls, shape: float, scale: float, truncation: float | None = None) -> "ClaimModel":
        """Lomax claims; ``truncation=None`` uses the 99.99th percentile."""
        if truncation is None:
            truncation = scale * ((1.0 - DEFAULT_TRUNCATION_QUANTILE) ** (-1.0 / shape) - 1.0)
        return cls("pareto", shape=float(shape), scale=float(scale), truncation=float(truncation))

    @classmethod
    def empirical(cls, values, weights=None) -> "ClaimModel":
        values = tuple(float(v) for v in values)
        if weights is None:
            weights = (1.0 / len(values),) * len(values)
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be nonnegative with positive sum")
        w = tuple(float(x) for x in w / w.sum())
        return cls("empirical", values=values, weights=w, truncation=max(values) if max(values) > 0 else 1.0)

    # distribution functions -------------------------------------------------

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.truncation)

    @property
    def characteristic_scale(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "pareto":
            return self.scale
        return float(np.average(self.values, weights=self.weights))

    def _raw_cdf(self, z):
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        if self.kind == "exponential":
            return -np.expm1(-self.rate * z)
        return 1.0 - (self.scale / (z + self.scale)) ** self.shape

    def _raw_pdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "exponential":
            return self.rate * np.exp(-self.rate * z)
        return self.shape * self.scale**self.shape / (z + self.scale) ** (self.shape + 1.0)

    @functools.cached_property
    def _mass(self) -> float:
        return float(self._raw_cdf(self.truncation)) if self.truncated else 1.0

    def pdf(self, z):
        """Density of the (truncated) law; continuous laws only."""
        if self.kind == "empirical":
            raise TypeError("empirical claims have no density")
        z = np.asarray(z, dtype=float)
        inside = (z >= 0) & (z <= self.truncation)
        return np.where(inside, self._raw_pdf(np.where(inside, z, 0.0)) / self._mass, 0.0)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "empirical":
            vals = np.asarray(self.values)
            w = np.asarray(self.weights)
            return (w[None, :] * (vals[None, :] <= z.reshape(-1, 1))).sum(axis=1).reshape(z.shape)
        return np.minimum(self._raw_cdf(np.minimum(z, self.truncation)) / self._mass, 1.0)

    def ppf(self, v):
        """Inverse CDF of the (truncated) law for ``v`` in [0, 1)."""
        v = np.asarray(v, dtype=float) * self._mass
        if self.kind == "exponential":
            return -np.log1p(-v) / self.rate
        if self.kind == "pareto":
            return self.scale * ((1.0 - v) ** (-1.0 / self.shape) - 1.0)
        raise TypeError("empirical claims have no continuous quantile function")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "empirical":
            return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.weights))
        return self.ppf(rng.random(size))

    # moments ------------------------------------------------------------------

    def _plain_moment(self, k: int) -> float:
        """``E[Z^k]`` or ``inf`` when it diverges."""
        try:
            return weighted_moment(self, 0.0, k)
        except DivergentMoment:
            return math.inf

    def moment_array(self, c, k: int) -> np.ndarray:
        """Vectorised ``E[Z^k e^{cZ}]`` for an array of ``c``.

        Exponential (untruncated) and empirical laws are exact.  Truncated
        continuous laws use a composite Gauss-Legendre rule certified against
        adaptive quadrature on ``[0, max(c)]``.
        """
        c = np.asarray(c, dtype=float)
        if k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        if self.kind == "empirical":
            z = np.asarray(self.values)
            w = np.asarray(self.weights) * z**k
            return np.exp(np.multiply.outer(c, z)) @ w
        if self.kind == "exponential" and not self.truncated:
            if np.any(c >= self.rate):
                raise DivergentMoment(f"E[Z^{k} e^(cZ)] diverges for c >= zeta={self.rate}")
            return self.rate * math.factorial(k) / (self.rate - c) ** (k + 1)
        if not self.truncated:
            raise DivergentMoment("untruncated Pareto claims have no exponential moments")
        c_max = float(np.max(c)) if c.size else 0.0
        bucket = _bucket(c_max)
        if c.size > CHEB_MIN_SIZE and float(np.min(c)) >= 0.0:
            cheb = _chebyshev_moment(self, bucket, k)
            if cheb is not None:
                return cheb(c)
        nodes, weights = _certified_rule(self, bucket)
        return np.exp(np.multiply.outer(c, nodes)) @ (weights * nodes**k)


def _bucket(c: float) -> float:
    # rules are cached per upper bound, rounded up to a coarse grid
    return max(0.25, math.ceil(c * 4.0 + 1e-12) / 4.0)


def weighted_moment(claims: ClaimModel, c: float, k: int) -> float:
    """``E[Z^k e^{cZ}] = ∫_0^D z^k e^{cz} dF_Z(z)`` for ``k`` in {0, 1, 2}.

    Untruncated exponential claims use the closed form ``ζ k!/(ζ - c)^{k+1}``.
    Truncated laws use adaptive quadrature at relative tolerance 1e-10, except
    the plain Pareto moments (``c = 0``) which have closed forms.

    Raises:
        DivergentMoment: the integral is infinite.
        QuadratureFailure: quadrature did not converge.
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    c = float(c)
    if claims.kind == "empirical":
        z = np.asarray(claims.values)
        return float(np.sum(np.asarray(claims.weights) * z**k * np.exp(c * z)))
    if claims.kind == "exponential":
        if not claims.truncated:
            if c >= claims.rate:
                raise DivergentMoment(
                    f"E[Z^{k} e^(cZ)] diverges: c={c} >= zeta={claims.rate} with D=inf"
                )
            return claims.rate * math.factorial(k) / (claims.rate - c) ** (k + 1)
        return _quad_moment(claims, c, k)
    # pareto (Lomax)
    if c == 0.0:
        return _lomax_moment(claims.shape, claims.scale, claims.truncation, k)
    if not claims.truncated:
        if c > 0:
            raise DivergentMoment("Pareto claims have no exponential moments without truncation")
        return _quad_moment(claims, c, k)
    return _quad_moment(claims, c, k)


def _lomax_moment(alpha: float, theta: float, d: float, k: int) -> float:
    if k == 0:
        return 1.0
    if not math.isfinite(d):
        if alpha <= k:
            raise DivergentMoment(f"E[Z^{k}] is infinite for Pareto shape {alpha} <= {k}")
        if k == 1:
            return theta / (alpha - 1.0)
        return 2.0 * theta**2 / ((alpha - 1.0) * (alpha - 2.0))
    lo, hi = theta, d + theta
    mass = 1.0 - (theta / hi) ** alpha

    def antiderivative(w):
        # ∫ (w - θ)^k w^{-α-1} dw, valid for α not in {1, 2}
        if k == 1:
            return w ** (1 - alpha) / (1 - alpha) + theta * w ** (-alpha) / alpha
        return (
            w ** (2 - alpha) / (2 - alpha)
            - 2 * theta * w ** (1 - alpha) / (1 - alpha)
            - theta**2 * w ** (-alpha) / alpha
        )

    if alpha in (1.0, 2.0):
        return _quad_moment(ClaimModel.pareto(alpha, theta, d), 0.0, k)
    return alpha * theta**alpha * (antiderivative(hi) - antiderivative(lo)) / mass


def _quad_moment(claims: ClaimModel, c: float, k: int) -> float:
    mass = claims._mass

    def integrand(z):
        return z**k * math.exp(c * z) * float(claims._raw_pdf(z))

    upper = claims.truncation
    if math.isfinite(upper):
        s = claims.characteristic_scale
        points = [p for p in (s, 10 * s, 100 * s) if p < upper]
        res = integrate.quad(
            integrand, 0.0, upper, epsabs=0.0, epsrel=MOMENT_RTOL, limit=500,
            points=points or None, full_output=1,
        )
    else:
        res = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=MOMENT_RTOL,
                             limit=500, full_output=1)
    value, abserr = res[0], res[1]
    if len(res) > 3 and abserr > 10 * MOMENT_RTOL * abs(value):
        raise QuadratureFailure(
            f"moment k={k}, c={c}: error estimate {abserr:.3g} for value {value:.6g}"
        )
    return value / mass


@functools.lru_cache(maxsize=64)
def _certified_rule(claims: ClaimModel, c_max: float, order: int = 16):
    """Composite Gauss-Legendre nodes/weights for ``dF_Z`` on ``[0, D]``.

    Panels are geometrically spaced from the claim scale up to ``D``; the rule
    is refined until it reproduces adaptive quadrature to 1e-10 (relative) at
    ``c`` in {0, c_max/2, c_max} and ``k`` in {0, 1, 2}.
    """
    d = claims.truncation
    x, w = np.polynomial.legendre.leggauss(order)
    checks = [(c, k) for c in (0.0, 0.5 * c_max, c_max) for k in (0, 1, 2)]
    reference = {ck: weighted_moment(claims, *ck) for ck in checks}
    n_panels = 24
    for _ in range(5):
        first = min(claims.characteristic_scale * 1e-3, d / n_panels)
        edges = np.concatenate([[0.0], np.geomspace(first, d, n_panels)])
        lo, hi = edges[:-1, None], edges[1:, None]
        nodes = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
        weights = (0.5 * (hi - lo) * w).ravel() * claims.pdf(nodes)
        ok = all(
            abs(np.sum(weights * nodes**k * np.exp(c * nodes)) - ref) <= MOMENT_RTOL * abs(ref)
            for (c, k), ref in reference.items()
        )
        if ok:
            nodes.setflags(write=False)
            weights.setflags(write=False)
            return nodes, weights
        n_panels *= 2
    raise QuadratureFailure(f"could not certify a quadrature rule up to c={c_max}")


@functools.lru_cache(maxsize=64)
def _chebyshev_moment(claims: ClaimModel, c_max: float, k: int, degree: int = 48):
    """Chebyshev interpolant of ``c -> E[Z^k e^{cZ}]`` on ``[0, c_max]``.

    Used for large batches.  Returns ``None`` unless it reproduces the
    certified rule to 1e-11 (relative) at points between the fit nodes.
    """
    nodes, weights = _certified_rule(claims, c_max)
    w = weights * nodes**k

    def exact(c):
        return np.exp(np.multiply.outer(c, nodes)) @ w

    cheb = np.polynomial.Chebyshev.interpolate(exact, degree, domain=[0.0, c_max])
    probe = np.linspace(0.0, c_max, 4 * degree + 3)
    ref = exact(probe)
    if np.max(np.abs(cheb(probe) - ref) / np.abs(ref)) > 1e-11:
        return None
    return cheb
