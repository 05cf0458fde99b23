"""A fully specified model instance: factor, market, claims, premia, horizon."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ClaimModel, FactorModel, MarketModel, RiskPreferences
from .paths import SimGrid
from .premium import InsurancePremium, PremiumPrinciple
from .reinsurance import ReinsuranceProblem

__all__ = ["Scenario", "PremiumMatched"]


@dataclass(frozen=True)
class PremiumMatched:
    """Insurance premium equal to the full-reinsurance premium ``q(t, y, 1)``.

    Makes the insurer's position riskless under ``u = 1``; used in tests.
    """

    principle: PremiumPrinciple

    def c(self, t, y):
        return self.principle.q(t, y, np.ones(np.broadcast(np.asarray(t), np.asarray(y)).shape))


@dataclass(frozen=True)
class Scenario:
    factor: FactorModel
    market: MarketModel
    claims: ClaimModel
    prefs: RiskPreferences
    principle: PremiumPrinciple
    insurance: InsurancePremium
    n_steps: int = 500
    initial_wealth: float = 1.0
    closed_forms: bool = False

    @property
    def grid(self) -> SimGrid:
        return SimGrid(0.0, self.prefs.horizon, self.n_steps)

    @property
    def reinsurance(self) -> ReinsuranceProblem:
        return ReinsuranceProblem(self.principle, self.prefs, self.market.rate)

    def c(self, t, y):
        return self.insurance.c(t, y)
