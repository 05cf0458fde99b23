"""Versioned JSON scenario configuration.

Unknown keys are rejected and the master seed is mandatory.  Validation
errors surface as :class:`~coxreins.errors.ConfigInvalid` carrying
``(field_path, message)`` pairs.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigInvalid
from .io import canonical_json, sha256_hex
from .models import (
    Affine,
    ClaimModel,
    Constant,
    ExpAffine,
    FactorModel,
    MarketModel,
    RiskPreferences,
)
from .premium import InsurancePremium, PremiumPrinciple
from .scenario import Scenario

__all__ = ["ScenarioConfig", "load_config", "parse_config", "build_scenario", "config_hash"]

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantCoef(_Strict):
    kind: Literal["constant"]
    value: float


class AffineCoef(_Strict):
    kind: Literal["affine"]
    intercept: float
    slope: float


class ExpAffineCoef(_Strict):
    kind: Literal["exp_affine"]
    scale: float
    rate: float


Coef = Annotated[Union[ConstantCoef, AffineCoef, ExpAffineCoef], Field(discriminator="kind")]
Intensity = Annotated[Union[ConstantCoef, ExpAffineCoef], Field(discriminator="kind")]


def _coef(c):
    if c.kind == "constant":
        return Constant(c.value)
    if c.kind == "affine":
        return Affine(c.intercept, c.slope)
    return ExpAffine(c.scale, c.rate)


class FactorSection(_Strict):
    drift: Coef = ConstantCoef(kind="constant", value=0.3)
    diffusion: Coef = ConstantCoef(kind="constant", value=0.3)
    y0: float = 1.0
    intensity: Intensity = ExpAffineCoef(kind="exp_affine", scale=0.1, rate=0.5)

    @model_validator(mode="after")
    def _positive_intensity(self):
        lam = self.intensity
        if (lam.kind == "constant" and not lam.value > 0) or (lam.kind == "exp_affine" and not lam.scale > 0):
            raise ValueError("intensity must be strictly positive")
        return self


class ConstantMarket(_Strict):
    kind: Literal["constant"]
    mu: float
    sigma: float = Field(gt=0)
    rate: float = Field(gt=0)
    p0: float = Field(default=1.0, gt=0)


class CevMarket(_Strict):
    kind: Literal["cev"]
    mu: float = 0.1
    sigma: float = Field(default=0.1, gt=0)
    beta: float = 0.5
    rate: float = Field(default=0.05, gt=0)
    p0: float = Field(default=1.0, gt=0)


Market = Annotated[Union[ConstantMarket, CevMarket], Field(discriminator="kind")]


class ExponentialClaims(_Strict):
    kind: Literal["exponential"]
    rate: float = Field(gt=0)
    truncation: Optional[float] = Field(default=None, gt=0)


class ParetoClaims(_Strict):
    kind: Literal["pareto"]
    shape: float = Field(gt=0)
    scale: float = Field(gt=0)
    truncation: Union[Literal["default", "none"], float] = "default"


class EmpiricalClaims(_Strict):
    kind: Literal["empirical"]
    values: list[float] = Field(min_length=1)
    weights: Optional[list[float]] = None


Claims = Annotated[Union[ExponentialClaims, ParetoClaims, EmpiricalClaims], Field(discriminator="kind")]


class PremiumSection(_Strict):
    principle: Literal["evp", "vp", "iavp"] = "iavp"
    theta_r: float = Field(default=0.1, gt=0)
    theta_i: float = Field(default=0.04, gt=0)


class GridSection(_Strict):
    n_steps: int = Field(default=500, ge=1)


class McSection(_Strict):
    n_reps: int = Field(default=10_000, ge=1)
    chunk_size: int = Field(default=2500, ge=1)
    threads: int = Field(default=1, ge=1)


class SweepSection(_Strict):
    parameter: Literal["eta", "theta_r", "horizon", "sigma", "rate"]
    start: float
    stop: float
    steps: int = Field(default=20, ge=2)
    target: Optional[Literal["reinsurance", "investment"]] = None
    t: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or self.start == self.stop:
            raise ValueError("sweep range must be finite and non-degenerate")
        tgt = self.resolved_target
        if tgt == "reinsurance" and self.parameter in ("sigma", "rate"):
            raise ValueError(f"parameter {self.parameter!r} does not affect the reinsurance strategy")
        if tgt == "investment" and self.parameter == "theta_r":
            raise ValueError("theta_r does not affect the investment strategy")
        return self

    @property
    def resolved_target(self) -> str:
        if self.target is not None:
            return self.target
        return "investment" if self.parameter in ("sigma", "rate") else "reinsurance"


class DynamicSection(_Strict):
    n_paths: int = Field(default=200, ge=1)
    dump_paths: bool = False


class LatticeSection(_Strict):
    n_t: int = Field(default=50, ge=2)
    n_p: int = Field(default=50, ge=2)
    n_reps: int = Field(default=4000, ge=1000)
    p_min: Optional[float] = Field(default=None, gt=0)
    p_max: Optional[float] = Field(default=None, gt=0)


class ProbeSection(_Strict):
    y_lo: Optional[float] = None
    y_hi: Optional[float] = None
    n_t: int = Field(default=51, ge=2)
    n_y: int = Field(default=41, ge=2)


class VarianceCheckSection(_Strict):
    u: float = Field(default=1.0, ge=0, le=1)


class ScenarioConfig(_Strict):
    schema_version: Literal[1]
    seed: int = Field(ge=0, lt=2**64)
    horizon: float = Field(default=5.0, gt=0)
    risk_aversion: float = Field(default=0.5, gt=0)
    initial_wealth: float = 1.0
    closed_forms: bool = False
    output_dir: str = "out"
    factor: FactorSection = FactorSection()
    market: Market = CevMarket(kind="cev")
    claims: Claims = ParetoClaims(kind="pareto", shape=1.8182, scale=0.0545)
    premium: PremiumSection = PremiumSection()
    grid: GridSection = GridSection()
    mc: McSection = McSection()
    sweep: Optional[SweepSection] = None
    dynamic: DynamicSection = DynamicSection()
    lattice: LatticeSection = LatticeSection()
    probe: ProbeSection = ProbeSection()
    variance_check: VarianceCheckSection = VarianceCheckSection()


def _errors(exc: ValidationError):
    return [(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"]) for e in exc.errors()]


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a decoded JSON document.

    Raises:
        ConfigInvalid: with field-level messages.
    """
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(_errors(exc)) from None


def load_config(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([("<file>", f"not valid JSON: {exc}")]) from None
    return parse_config(data)


def config_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON of every field, defaults included."""
    return sha256_hex(canonical_json(cfg.model_dump(mode="json")))


def with_changes(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``cfg`` with dotted-path fields replaced (re-validated)."""
    data = cfg.model_dump(mode="json")
    for key, value in changes.items():
        node = data
        *head, last = key.split(".")
        for h in head:
            node = node[h]
        node[last] = value
    return parse_config(data)


def _claims(c) -> ClaimModel:
    if c.kind == "exponential":
        return ClaimModel.exponential(c.rate, math.inf if c.truncation is None else c.truncation)
    if c.kind == "pareto":
        if c.truncation == "default":
            return ClaimModel.pareto(c.shape, c.scale)
        return ClaimModel.pareto(c.shape, c.scale, math.inf if c.truncation == "none" else c.truncation)
    return ClaimModel.empirical(c.values, c.weights)


def build_scenario(cfg: ScenarioConfig, principle: str | None = None) -> Scenario:
    """Instantiate the model objects described by ``cfg``."""
    f = cfg.factor
    factor = FactorModel(_coef(f.drift), _coef(f.diffusion), f.y0, _coef(f.intensity))
    m = cfg.market
    if m.kind == "cev":
        market = MarketModel.cev(m.mu, m.sigma, m.beta, m.rate, m.p0)
    else:
        market = MarketModel.constant(m.mu, m.sigma, m.rate, m.p0)
    claims = _claims(cfg.claims)
    prefs = RiskPreferences(cfg.risk_aversion, cfg.horizon)
    kind = principle or cfg.premium.principle
    prem = PremiumPrinciple(kind, cfg.premium.theta_r, claims, factor, cfg.horizon)
    ins = InsurancePremium(cfg.premium.theta_i, claims, factor)
    return Scenario(factor, market, claims, prefs, prem, ins, cfg.grid.n_steps, cfg.initial_wealth,
                    cfg.closed_forms)
