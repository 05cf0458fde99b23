import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coxreins.config import build_scenario, parse_config  # noqa: E402
from coxreins.models import ClaimModel, Constant, ExpAffine, FactorModel, MarketModel, RiskPreferences  # noqa: E402
from coxreins.premium import InsurancePremium, PremiumPrinciple  # noqa: E402
from coxreins.scenario import Scenario  # noqa: E402

# Table 1
T, ETA, THETA_R, RATE = 5.0, 0.5, 0.1, 0.05
ZETA = 2.0


@pytest.fixture
def factor():
    return FactorModel(Constant(0.3), Constant(0.3), 1.0, ExpAffine(0.1, 0.5))


@pytest.fixture
def flat_factor():
    return FactorModel(Constant(0.0), Constant(0.0), 1.0, Constant(0.1))


@pytest.fixture
def exp_claims():
    return ClaimModel.exponential(ZETA)


@pytest.fixture
def pareto_claims():
    return ClaimModel.pareto(1.8182, 0.0545)


@pytest.fixture
def prefs():
    return RiskPreferences(ETA, T)


def make_scenario(factor, claims, kind="evp", market=None, theta_i=0.04, n_steps=500, x0=1.0, theta_r=THETA_R,
                  prefs=None):
    prefs = prefs or RiskPreferences(ETA, T)
    market = market or MarketModel.cev(0.1, 0.1, 0.5, RATE, 1.0)
    pr = PremiumPrinciple(kind, theta_r, claims, factor, prefs.horizon)
    return Scenario(factor, market, claims, prefs, pr, InsurancePremium(theta_i, claims, factor), n_steps, x0)


@pytest.fixture
def table1_cfg():
    return parse_config({"schema_version": 1, "seed": 12345})


@pytest.fixture
def table1_scenario(table1_cfg):
    return build_scenario(table1_cfg)


# acceptance criteria report: (label, passed, detail) appended by test_acceptance
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
