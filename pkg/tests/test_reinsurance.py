import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ETA, RATE, T, THETA_R, ZETA
from coxreins.errors import ConcavityViolated, GuardViolated, RootBracketFailure
from coxreins.models import ClaimModel, Constant, ExpAffine, FactorModel, RiskPreferences
from coxreins.premium import PremiumPrinciple, PremiumTable
from coxreins.reinsurance import (
    ReinsuranceProblem,
    Region,
    closed_form_exponential,
    exponential_guard_margin,
)
from oracles import exponential_retention_exact

KW = dict(zeta=ZETA, eta=ETA, rate=RATE, horizon=T, theta_r=THETA_R)
LAM0 = 0.1 * math.exp(0.5)

# independent evaluations of the closed form and of the exact cubic root
EVP_U0 = 0.8550265122494065
EVP_T0 = 38.6240879275751
VP_TRUE_T = 0.7349200492086498
VP_PUBLISHED_T = 0.6514837167011076
IAVP_TRUE_0 = 0.6751880459957581
IAVP_PUBLISHED_0 = 0.5512895024198912


def problem(kind, factor, claims, theta=THETA_R, eta=ETA, horizon=T):
    pr = PremiumPrinciple(kind, theta, claims, factor, horizon)
    return ReinsuranceProblem(pr, RiskPreferences(eta, horizon), RATE)


def y_of(lam):
    return 2.0 * math.log(lam / 0.1)


class TestClosedForms:
    def test_evp_worked_value(self):
        cf = closed_form_exponential("evp", 0.0, **KW)
        assert float(cf.u_star) == pytest.approx(EVP_U0, abs=1e-12)
        assert cf.t0 == pytest.approx(EVP_T0, rel=1e-12) and cf.t0 > T

    def test_evp_hand_value(self):
        a = ETA * math.exp(RATE * T)
        assert EVP_U0 == pytest.approx(1 - (ZETA / a) * (1 - 1 / math.sqrt(1 + THETA_R)), abs=1e-15)

    def test_published_variance_forms(self):
        assert float(closed_form_exponential("vp", T, **KW).u_star) == pytest.approx(VP_PUBLISHED_T, abs=1e-12)
        assert float(closed_form_exponential("iavp", 0.0, LAM0, **KW).u_star) == pytest.approx(
            IAVP_PUBLISHED_0, abs=1e-12)

    def test_published_variance_forms_differ_from_true_root(self, factor, exp_claims):
        # the published VP/IAVP forms do not solve the first-order condition
        u = problem("vp", factor, exp_claims).optimal_u(T, 1.0).u_star
        assert u == pytest.approx(VP_TRUE_T, abs=1e-9)
        assert abs(u - VP_PUBLISHED_T) > 0.05

    def test_guard(self):
        assert exponential_guard_margin(2.0, 0.5, 0.05, 5.0) == pytest.approx(4 - math.exp(0.25))
        with pytest.raises(GuardViolated):
            closed_form_exponential("evp", 0.0, zeta=0.5, eta=0.5, rate=0.05, horizon=5.0, theta_r=0.1)

    def test_evp_zero_after_t0(self):
        kw = dict(KW, theta_r=3.0, zeta=3.0, eta=0.5)
        cf = closed_form_exponential("evp", np.linspace(0, T, 11), **kw)
        assert cf.t0 < T
        t = np.linspace(0, T, 11)
        assert np.all(cf.u_star[t >= cf.t0] == 0.0)


class TestBisection:
    @pytest.mark.parametrize("kind", ["evp", "vp", "iavp"])
    @pytest.mark.parametrize("t", [0.0, 2.5, T])
    @pytest.mark.parametrize("lam", [0.05, LAM0, 0.5])
    def test_matches_exact_root(self, kind, t, lam, exp_claims):
        fac = FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))
        sol = problem(kind, fac, exp_claims).optimal_u(t, y_of(lam))
        assert sol.u_star == pytest.approx(exponential_retention_exact(kind, t, lam, **KW), abs=1e-9)
        assert abs(sol.residual) < 1e-8

    def test_vectorised_equals_scalar(self, factor, pareto_claims):
        prob = problem("iavp", factor, pareto_claims)
        t = np.array([0.0, 1.3, 4.9, 5.0])
        y = np.array([-2.0, 0.0, 1.0, 4.0])
        u, region, _ = prob.optimal_u_array(t, y)
        for i in range(t.size):
            s = prob.optimal_u(t[i], y[i])
            assert u[i] == pytest.approx(s.u_star, abs=2e-10)
            assert region[i] == s.region.value

    def test_regions(self, factor, exp_claims):
        # free reinsurance is always bought in full
        assert problem("evp", factor, exp_claims, theta=0.0).optimal_u(0.0, 1.0).region is Region.A1
        # very expensive reinsurance: none bought
        sol = problem("evp", factor, exp_claims, theta=50.0).optimal_u(0.0, 1.0)
        assert sol.region is Region.A0 and sol.u_star == 0.0
        assert problem("evp", factor, exp_claims).classify_region(0.0, 1.0) is Region.INTERIOR

    def test_certificates(self, factor, exp_claims):
        assert problem("evp", factor, exp_claims).concavity_certificate(0.0, 1.0).condition == "convex_premium"

    def test_concave_premium_certificates(self, factor, exp_claims, prefs):
        y = np.linspace(-3.0, 5.0, 9)
        u = np.linspace(0.0, 1.0, 11)
        yy, uu = np.meshgrid(y, u, indexing="ij")
        lam = factor.lam(0.0, yy)
        for k, cond in ((0.01, "curvature_bound"), (40.0, None)):
            # q = λ(E[Z](1+θ)u - k u²/2 + ...) concave in u
            q = lam * (0.6 * uu - 0.5 * k * uu**2 + k * uu)
            d1 = lam * (0.6 - k * uu + k)
            d2 = -k * lam + 0 * uu
            tab = PremiumTable(y, u, q, d1, d2)
            prob = ReinsuranceProblem(PremiumPrinciple("custom", 0.0, exp_claims, factor, T, tab), prefs, RATE)
            if cond:
                assert prob.concavity_certificate(0.0, 1.0).condition == cond
            else:
                with pytest.raises(ConcavityViolated):
                    prob.concavity_certificate(0.0, 1.0)

    def test_surface_csv(self, tmp_path, factor, pareto_claims):
        surf = problem("iavp", factor, pareto_claims).surface(np.linspace(0, T, 3), np.linspace(0, 2, 4))
        surf.to_csv(tmp_path / "s.csv")
        rows = list(csv.reader(open(tmp_path / "s.csv")))
        assert rows[0] == ["t", "y", "lambda", "region", "u_star"] and len(rows) == 13
        assert surf.u(0.0, 0.0) == pytest.approx(surf.u_star[0, 0])


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["evp", "vp", "iavp"]), t=st.floats(0, 5), y=st.floats(-3, 5),
       theta=st.floats(0.01, 1.0), eta=st.floats(0.1, 2.0))
def test_optimum_maximises_objective(kind, t, y, theta, eta):
    fac = FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))
    prob = problem(kind, fac, ClaimModel.pareto(1.8182, 0.0545), theta=theta, eta=eta)
    sol = prob.optimal_u(t, y)
    assert 0.0 <= sol.u_star <= 1.0
    grid = np.linspace(0.0, 1.0, 101)
    best = max(float(prob.psi_u(t, y, u)) for u in grid)
    assert float(prob.psi_u(t, y, sol.u_star)) >= best - 1e-12
    if sol.region is Region.INTERIOR:
        assert abs(sol.residual) < 1e-7


@settings(max_examples=25, deadline=None)
@given(eta1=st.floats(0.1, 1.5), d=st.floats(0.05, 0.5), t=st.floats(0, 5))
def test_retention_nondecreasing_in_eta(eta1, d, t):
    fac = FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))
    cm = ClaimModel.pareto(1.8182, 0.0545)
    u1 = problem("iavp", fac, cm, eta=eta1).optimal_u(t, 1.0).u_star
    u2 = problem("iavp", fac, cm, eta=eta1 + d).optimal_u(t, 1.0).u_star
    assert u2 >= u1 - 1e-9


@settings(max_examples=25, deadline=None)
@given(th=st.floats(0.02, 0.8), d=st.floats(0.01, 0.3), kind=st.sampled_from(["evp", "vp", "iavp"]))
def test_retention_nonincreasing_in_loading(th, d, kind):
    fac = FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))
    cm = ClaimModel.pareto(1.8182, 0.0545)
    u1 = problem(kind, fac, cm, theta=th).optimal_u(0.0, 1.0).u_star
    u2 = problem(kind, fac, cm, theta=th + d).optimal_u(0.0, 1.0).u_star
    assert u2 <= u1 + 1e-9


def test_bracket_failure_reported(factor, exp_claims, monkeypatch):
    prob = problem("evp", factor, exp_claims)
    monkeypatch.setattr(ReinsuranceProblem, "dpsi_du", lambda self, t, y, u: -1.0 + 0 * np.asarray(u))
    with pytest.raises(RootBracketFailure):
        prob.optimal_u(0.0, 1.0)


class TestWorkedExamples:
    def test_full_cover_objective(self, factor, pareto_claims):
        prob = problem("iavp", factor, pareto_claims)
        assert float(prob.psi_u(1.0, 0.5, 1.0)) == pytest.approx(
            -float(prob.a(1.0)) * float(prob.principle.q(1.0, 0.5, 1.0)), rel=1e-14)

    def test_objective_against_quadrature(self, factor, exp_claims):
        from scipy import integrate

        prob = problem("evp", factor, exp_claims)
        a, lam = ETA * math.exp(RATE * T), LAM0
        mgf = integrate.quad(lambda z: 2.0 * math.exp((a * 0.5 - 2.0) * z), 0, math.inf,
                             epsabs=0, epsrel=1e-12)[0]
        ref = -a * 1.1 * 0.5 * lam * 0.5 + lam * (1.0 - mgf)
        assert float(prob.psi_u(0.0, 1.0, 0.5)) == pytest.approx(ref, rel=1e-10)

    def test_vanishing_intensity_buys_nothing(self, exp_claims):
        fac = FactorModel(Constant(0.0), Constant(0.0), 0.0, Constant(1e-12))
        for kind in ("evp", "vp", "iavp"):
            prob = problem(kind, fac, exp_claims)
            u = np.linspace(0, 1, 11)
            psi = prob.psi_u(0.0, 0.0, u)
            assert np.argmax(psi) == 0 or np.ptp(psi) < 1e-12

    def test_evp_never_full_cover(self, factor, pareto_claims):
        prob = problem("evp", factor, pareto_claims, theta=1e-3)
        _, region, _ = prob.optimal_u_array(*np.meshgrid(np.linspace(0, T, 11), np.linspace(-3, 5, 9)))
        assert not np.any(region == Region.A1.value)

    @pytest.mark.parametrize("kind", ["vp", "iavp"])
    def test_variance_principles_interior(self, kind, factor, pareto_claims):
        prob = problem(kind, factor, pareto_claims, theta=3.0)
        _, region, _ = prob.optimal_u_array(*np.meshgrid(np.linspace(0, T, 11), np.linspace(-3, 5, 9)))
        assert np.all(region == Region.INTERIOR.value)

    def test_evp_a0_when_loading_exceeds_moment_ratio(self, factor, pareto_claims):
        prob = problem("evp", factor, pareto_claims)
        a = float(prob.a(0.0))
        from coxreins.models import weighted_moment

        ratio = weighted_moment(pareto_claims, a, 1) / pareto_claims.mean
        sol = problem("evp", factor, pareto_claims, theta=ratio - 1 + 1e-6).optimal_u(0.0, 1.0)
        assert sol.region is Region.A0 and sol.u_star == 0.0

    def test_vp_zero_loading_limit(self, factor, exp_claims):
        assert float(closed_form_exponential("vp", 0.0, **dict(KW, theta_r=0.0)).u_star) == 1.0
        assert problem("vp", factor, exp_claims, theta=0.0).optimal_u(0.0, 1.0).u_star == 1.0

    def test_iavp_published_collapses_to_vp(self):
        t = np.linspace(0, T, 5)
        np.testing.assert_array_equal(closed_form_exponential("iavp", t, 0.0, **KW).u_star,
                                      closed_form_exponential("vp", t, **KW).u_star)

    def test_vp_published_at_terminal(self):
        u = float(closed_form_exponential("vp", T, **KW).u_star)
        assert u == pytest.approx(1 - (ZETA / ETA) * (1 - math.sqrt(ZETA / (ZETA + 4 * THETA_R))), abs=1e-15)

    def test_iavp_bisection_bracket(self, factor, exp_claims):
        sol = problem("iavp", factor, exp_claims).optimal_u(0.0, 1.0)
        assert 0.0 < sol.u_star < 1.0
        assert sol.u_star == pytest.approx(IAVP_TRUE_0, abs=1e-9)
