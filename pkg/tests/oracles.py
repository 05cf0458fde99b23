"""Independent reference computations used only by the test suite."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded


def exponential_retention_exact(kind, t, lam, *, zeta, eta, rate, horizon, theta_r):
    """Exact root of the first-order condition for untruncated exponential claims.

    EVP is solved in closed form.  For VP/IAVP the condition
    ``1/ζ + 4θ' u/ζ² = ζ/s²`` with ``s = ζ - a(1-u)`` becomes the cubic
    ``(4θ'/a) s³ + (ζ + 4θ' - 4θ'ζ/a) s² - ζ³ = 0``.
    """
    a = eta * math.exp(rate * (horizon - t))
    if kind == "evp":
        k = (zeta / a) * (1.0 - 1.0 / math.sqrt(1.0 + theta_r))
        return max(1.0 - k, 0.0)
    th = theta_r if kind == "vp" else theta_r * (1.0 + horizon * lam)
    roots = np.roots([4.0 * th / a, zeta + 4.0 * th - 4.0 * th * zeta / a, 0.0, -zeta**3])
    good = [r.real for r in roots if abs(r.imag) < 1e-12 and zeta - a - 1e-12 <= r.real <= zeta + 1e-12]
    assert len(good) == 1, roots
    s = good[0]
    return 1.0 - (zeta - s) / a


def lomax_moment_bruteforce(alpha, theta, d, c, k):
    """``E[Z^k e^{cZ}]`` for the Lomax law conditioned on ``Z <= d`` at tight tolerance."""
    mass = 1.0 - (theta / (d + theta)) ** alpha
    f = lambda z: z**k * math.exp(c * z) * alpha * theta**alpha / (z + theta) ** (alpha + 1)
    pts = [p for p in (theta, 10 * theta, 100 * theta) if p < d]
    val, _ = integrate.quad(f, 0.0, d, epsabs=0.0, epsrel=1e-13, limit=1000, points=pts)
    return val / mass


def cev_g_analytic(t, p, mu, sigma, rate, horizon):
    """``g`` for the CEV model with β = 1/2, where ``1/P`` has affine mean under Q."""
    tau = horizon - t
    lam2 = ((mu - rate) / sigma) ** 2
    integral = (1.0 - math.exp(-rate * tau)) / (rate * p) + (sigma**2 / rate) * (tau - (1.0 - math.exp(-rate * tau)) / rate)
    return -0.5 * lam2 * integral


def cev_g_analytic_dp(t, p, mu, sigma, rate, horizon):
    tau = horizon - t
    lam2 = ((mu - rate) / sigma) ** 2
    return 0.5 * lam2 * (1.0 - math.exp(-rate * tau)) / (rate * p**2)


def crank_nicolson_g(mu, sigma, beta, rate, horizon, p_eval=1.0, n_x=801, n_t=1000, x_lo=math.log(1e-3),
                     x_hi=math.log(1e3)):
    """Crank–Nicolson solve of the backward PDE for ``g`` in ``x = ln p``.

    In ``τ = T - t``:  ``g_τ = (R - s²/2) g_x + (s²/2) g_xx - k/2`` with
    ``s² = σ² p^{2β}`` and ``k = (μ-R)²/s²``.  Dirichlet boundaries use the
    frozen-coefficient solution ``-k(p_b) τ / 2``.  Returns ``(g, dg/dp)``
    at ``p_eval`` by cubic interpolation.
    """
    x = np.linspace(x_lo, x_hi, n_x)
    h = x[1] - x[0]
    dt = horizon / n_t
    p = np.exp(x)
    s2 = sigma**2 * p ** (2 * beta)
    k = (mu - rate) ** 2 / s2
    drift = rate - 0.5 * s2
    lower = 0.5 * s2 / h**2 - drift / (2 * h)
    diag = -s2 / h**2
    upper = 0.5 * s2 / h**2 + drift / (2 * h)
    src = -0.5 * k
    g = np.zeros(n_x)
    inner = slice(1, -1)
    n = n_x - 2
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5 * dt * upper[1:-2]
    ab[1, :] = 1.0 - 0.5 * dt * diag[inner]
    ab[2, :-1] = -0.5 * dt * lower[2:-1]
    for step in range(1, n_t + 1):
        tau_new = step * dt
        lg = lower[inner] * g[:-2] + diag[inner] * g[1:-1] + upper[inner] * g[2:]
        rhs = g[1:-1] + 0.5 * dt * lg + dt * src[inner]
        b_lo = -0.5 * k[0] * tau_new
        b_hi = -0.5 * k[-1] * tau_new
        rhs[0] += 0.5 * dt * lower[1] * b_lo
        rhs[-1] += 0.5 * dt * upper[-2] * b_hi
        g_new = np.empty_like(g)
        g_new[0], g_new[-1] = b_lo, b_hi
        g_new[1:-1] = solve_banded((1, 1), ab, rhs)
        g = g_new
    from scipy.interpolate import CubicSpline

    spl = CubicSpline(x, g)
    xe = math.log(p_eval)
    return float(spl(xe)), float(spl(xe, 1) / p_eval)


def crank_nicolson_g_with_error(mu, sigma, beta, rate, horizon, p_eval=1.0):
    """Fine-grid value and a refinement error estimate ``|fine - coarse| / 3``."""
    fine = crank_nicolson_g(mu, sigma, beta, rate, horizon, p_eval, n_x=1601, n_t=2000)
    coarse = crank_nicolson_g(mu, sigma, beta, rate, horizon, p_eval, n_x=801, n_t=1000)
    err = abs(fine[0] - coarse[0]) / 3.0
    err_dp = abs(fine[1] - coarse[1]) / 3.0
    return fine[0], err, fine[1], err_dp
