import json

import pytest

from coxreins.config import build_scenario, parse_config, with_changes
from coxreins.errors import AssumptionsViolated
from coxreins.experiments import _require_valid
from coxreins.validation import validate_assumptions

EXP = {"kind": "exponential", "rate": 2.0}


def cfg(**kw):
    base = {"schema_version": 1, "seed": 1}
    base.update(kw)
    return parse_config(base)


class TestValidate:
    @pytest.mark.parametrize("principle", ["evp", "vp", "iavp"])
    def test_table1_exponential_passes(self, principle):
        c = cfg(claims=EXP, closed_forms=True, premium={"principle": principle})
        rep = validate_assumptions(build_scenario(c))
        assert rep.ok, rep.to_text()
        assert rep["exponential_guard"].status == "pass"

    def test_mgf_pole(self):
        # η e^{RT} >= ζ
        c = cfg(claims={"kind": "exponential", "rate": 0.5}, risk_aversion=0.5)
        rep = validate_assumptions(build_scenario(c))
        assert rep["exponential_moments"].status == "fail"
        assert "DivergentMoment" in rep["exponential_moments"].detail
        assert rep.fatal
        with pytest.raises(AssumptionsViolated, match="exponential_moments"):
            _require_valid(build_scenario(c), c)

    def test_untruncated_pareto_fails(self):
        c = cfg(claims={"kind": "pareto", "shape": 1.8182, "scale": 0.0545, "truncation": "none"},
                premium={"principle": "evp"})
        rep = validate_assumptions(build_scenario(c))
        assert rep["exponential_moments"].status == "fail"

    def test_cev_sigma_probe_warns(self):
        rep = validate_assumptions(build_scenario(cfg()))
        assert rep["sigma_lower_bound"].status == "warn"
        assert rep["intensity_bounded"].status == "warn"
        assert rep.ok

    def test_constant_market_and_intensity_clean(self):
        c = cfg(market={"kind": "constant", "mu": 0.1, "sigma": 0.2, "rate": 0.05},
                factor={"intensity": {"kind": "constant", "value": 0.1}})
        rep = validate_assumptions(build_scenario(c))
        assert all(ch.status == "pass" for ch in rep.checks), rep.to_text()

    def test_contract_failure_reported_not_fatal(self):
        c = cfg(premium={"principle": "evp", "theta_r": 0.02, "theta_i": 0.04})
        rep = validate_assumptions(build_scenario(c))
        assert rep["full_cover_dearer"].status == "fail" and not rep.fatal

    def test_closed_forms_need_exponential(self):
        rep = validate_assumptions(build_scenario(cfg(closed_forms=True)))
        assert rep["exponential_guard"].status == "fail"

    def test_guard_margin(self):
        c = cfg(claims={"kind": "exponential", "rate": 0.6}, closed_forms=True, risk_aversion=0.5)
        rep = validate_assumptions(build_scenario(c))
        assert rep["exponential_guard"].status == "fail"

    def test_json_text(self):
        rep = validate_assumptions(build_scenario(cfg()))
        d = json.loads(rep.to_json())
        assert d["ok"] and {c["name"] for c in d["checks"]} >= {"concavity", "net_profit", "premium_bound"}
        assert rep.to_text().endswith("overall: PASS")
