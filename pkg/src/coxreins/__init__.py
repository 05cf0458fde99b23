"""Optimal proportional reinsurance and investment under Cox claim arrivals.

Claim arrivals follow a Cox process whose intensity is driven by a diffusion
factor; the insurer has exponential (CARA) utility and invests in a bond and
a risky asset.  The package computes the optimal retention ``u*(t, y)`` and
risky investment ``w*(t, p)``, checks the modelling hypotheses at runtime,
and validates optimality by simulation.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .models import (  # noqa: E402
    Affine,
    ClaimModel,
    Constant,
    ExpAffine,
    FactorModel,
    MarketModel,
    Power,
    RiskPreferences,
    weighted_moment,
)
from .paths import SimGrid, simulate_asset, simulate_claims, simulate_factor, simulate_paths  # noqa: E402
from .premium import InsurancePremium, PremiumPrinciple, PremiumTable, iavp_dominance_check  # noqa: E402
from .reinsurance import ReinsuranceProblem, Region, closed_form_exponential  # noqa: E402
from .investment import build_g_lattice, estimate_g, optimal_w, psi_w  # noqa: E402
from .scenario import Scenario  # noqa: E402
from .valuation import (  # noqa: E402
    StrategyField,
    dominance_tournament,
    estimate_f,
    simulate_wealth,
    value_function,
    variance_decomposition,
)
from .validation import validate_assumptions  # noqa: E402
