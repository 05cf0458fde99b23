"""Experiment drivers behind the command-line verbs.

Each ``run_*`` function takes a validated :class:`ScenarioConfig`, writes its
CSV/JSON artifacts plus ``manifest.json`` into the output directory, and
returns a small summary dict.
"""

from __future__ import annotations

import logging
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pydantic
import scipy

from . import __version__, _mc
from .config import ScenarioConfig, build_scenario, config_hash, with_changes
from .errors import AssumptionsViolated
from .investment import build_g_lattice, estimate_g, optimal_w
from .io import write_csv, write_json
from .paths import simulate_factor, simulate_paths
from .premium import iavp_dominance_check
from .validation import validate_assumptions
from .valuation import StrategyField, dominance_tournament, variance_decomposition

log = logging.getLogger(__name__)

__all__ = [
    "run_validate",
    "run_sweep",
    "run_dynamic",
    "run_g_lattice",
    "run_dominance",
    "run_variance_check",
    "monotonicity",
]

SWEEP_FIELDS = {
    "eta": "risk_aversion",
    "theta_r": "premium.theta_r",
    "horizon": "horizon",
    "sigma": "market.sigma",
    "rate": "market.rate",
}


def _out_dir(cfg: ScenarioConfig, out) -> Path:
    path = Path(out if out is not None else cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(out: Path, command: str, cfg: ScenarioConfig, artifacts, extra=None) -> None:
    doc = {
        "command": command,
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "artifacts": sorted(str(a) for a in artifacts),
        "versions": {
            "coxreins": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pydantic": pydantic.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        doc.update(extra)
    write_json(out / "manifest.json", doc)


def _require_valid(scenario, cfg: ScenarioConfig):
    report = validate_assumptions(scenario, _probe_bounds(cfg))
    for c in report.failures:
        log.warning("assumption check failed: %s (%s)", c.name, c.detail)
    if report.fatal:
        raise AssumptionsViolated(report)
    return report


def _probe_bounds(cfg: ScenarioConfig):
    y0 = cfg.factor.y0
    lo = cfg.probe.y_lo if cfg.probe.y_lo is not None else y0 - 4.0
    hi = cfg.probe.y_hi if cfg.probe.y_hi is not None else y0 + 4.0
    return lo, hi


def monotonicity(values) -> str:
    """``non-decreasing``, ``non-increasing``, ``constant`` or ``mixed``."""
    d = np.diff(np.asarray(values, float))
    if np.all(d == 0):
        return "constant"
    if np.all(d >= 0):
        return "non-decreasing"
    if np.all(d <= 0):
        return "non-increasing"
    return "mixed"


# ---------------------------------------------------------------------------


def run_validate(cfg: ScenarioConfig, out=None) -> dict:
    """Write ``validation.txt`` and ``validation.json``; never raises on failed checks."""
    out = _out_dir(cfg, out)
    scenario = build_scenario(cfg)
    report = validate_assumptions(scenario, _probe_bounds(cfg))
    (out / "validation.txt").write_text(report.to_text() + "\n")
    (out / "validation.json").write_text(report.to_json() + "\n")
    _manifest(out, "validate", cfg, ["validation.txt", "validation.json"])
    return report.to_dict()


def _reinsurance_point(cfg: ScenarioConfig, t: float):
    row = []
    for kind in ("evp", "iavp"):
        sc = build_scenario(cfg, principle=kind)
        row.append(sc.reinsurance.optimal_u(min(t, sc.prefs.horizon), sc.factor.y0).u_star)
    return row


def _investment_point(cfg: ScenarioConfig, t: float, seed: int):
    sc = build_scenario(cfg)
    T = sc.prefs.horizon
    est = estimate_g(min(t, T), sc.market.p0, sc.market, T, cfg.mc.n_reps, seed, cfg.grid.n_steps,
                     chunk_size=cfg.mc.chunk_size)
    return [optimal_w(min(t, T), sc.market.p0, sc.market, sc.prefs, est)[0]]


def run_sweep(cfg: ScenarioConfig, out=None) -> dict:
    """One-parameter sensitivity sweep of the time-``t`` optimal strategy.

    Reinsurance sweeps write ``param_value, u_star_evp, u_star_iavp`` at
    ``y = Y0``; investment sweeps write ``param_value, w_star`` at ``p = P0``.
    Point ``i`` of an investment sweep uses the seed derived from
    ``(seed, i)``.
    """
    if cfg.sweep is None:
        from .errors import ConfigInvalid

        raise ConfigInvalid([("sweep", "a sweep section is required for the sweep command")])
    sw = cfg.sweep
    out = _out_dir(cfg, out)
    _require_valid(build_scenario(cfg), cfg)
    values = np.linspace(sw.start, sw.stop, sw.steps)
    field = SWEEP_FIELDS[sw.parameter]
    points = [with_changes(cfg, **{field: float(v)}) for v in values]
    target = sw.resolved_target

    def work(i):
        if target == "reinsurance":
            return _reinsurance_point(points[i], sw.t)
        return _investment_point(points[i], sw.t, _mc.child_seed(cfg.seed, i))

    n_threads = cfg.mc.threads
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            rows = list(pool.map(work, range(len(points))))
    else:
        rows = [work(i) for i in range(len(points))]

    name = f"sweep_{sw.parameter}"
    if target == "reinsurance":
        header = ["param_value", "u_star_evp", "u_star_iavp"]
    else:
        header = ["param_value", "w_star"]
        name += "_investment" if sw.parameter == "eta" else ""
    write_csv(out / f"{name}.csv", header, ([v, *r] for v, r in zip(values, rows)))
    cols = np.asarray(rows, float)
    summary = {"parameter": sw.parameter, "target": target,
               "directions": {h: monotonicity(cols[:, k]) for k, h in enumerate(header[1:])}}
    if target == "reinsurance":
        diff = cols[:, 0] - cols[:, 1]
        sign = np.sign(diff)
        flips = np.nonzero(sign[1:] != sign[:-1])[0]
        crossings = []
        for k in flips:
            v0, v1, d0, d1 = values[k], values[k + 1], diff[k], diff[k + 1]
            crossings.append(float(v0 - d0 * (v1 - v0) / (d1 - d0)) if d1 != d0 else float(v0))
        summary["evp_minus_iavp_first"] = float(diff[0])
        summary["evp_minus_iavp_last"] = float(diff[-1])
        summary["crossovers"] = crossings
    write_json(out / f"{name}_summary.json", summary)
    _manifest(out, "sweep", cfg, [f"{name}.csv", f"{name}_summary.json"])
    return summary


def run_dynamic(cfg: ScenarioConfig, out=None) -> dict:
    """Optimal retentions along simulated factor paths.

    ``dynamic.csv`` has ``path, t, lambda_t, u_star_iavp_t, u_star_evp_t``;
    ``dynamic_mean.csv`` holds the cross-path means.
    """
    out = _out_dir(cfg, out)
    sc_iavp = build_scenario(cfg, principle="iavp")
    sc_evp = build_scenario(cfg, principle="evp")
    _require_valid(sc_iavp, cfg)
    n = cfg.dynamic.n_paths
    grid = sc_iavp.grid
    y, lam = simulate_factor(sc_iavp.factor, grid, cfg.seed, n, cfg.mc.chunk_size, cfg.mc.threads)
    t = grid.times
    u_iavp, _, _ = sc_iavp.reinsurance.optimal_u_array(np.broadcast_to(t, y.shape), y)
    u_evp_t, _, _ = sc_evp.reinsurance.optimal_u_array(t, np.full_like(t, sc_evp.factor.y0))
    u_evp = np.broadcast_to(u_evp_t, y.shape)

    def rows():
        for r in range(n):
            for i in range(t.size):
                yield r, t[i], lam[r, i], u_iavp[r, i], u_evp[r, i]

    write_csv(out / "dynamic.csv", ["path", "t", "lambda_t", "u_star_iavp_t", "u_star_evp_t"], rows())
    mean_iavp = u_iavp.mean(axis=0)
    write_csv(out / "dynamic_mean.csv", ["t", "lambda_t", "u_star_iavp_t", "u_star_evp_t"],
              zip(t, lam.mean(axis=0), mean_iavp, u_evp_t))
    artifacts = ["dynamic.csv", "dynamic_mean.csv"]
    if cfg.dynamic.dump_paths:
        bundle = simulate_paths(sc_iavp.factor, sc_iavp.market, sc_iavp.claims, grid, cfg.seed, n,
                                chunk_size=cfg.mc.chunk_size, threads=cfg.mc.threads)
        bundle.to_csv(out / "paths.csv", out / "events.csv")
        artifacts += ["paths.csv", "events.csv"]
    slope = float(np.polyfit(t, mean_iavp, 1)[0])
    summary = {
        "n_paths": n,
        "mean_iavp_start": float(mean_iavp[0]),
        "mean_iavp_end": float(mean_iavp[-1]),
        "mean_iavp_slope": slope,
        "mean_iavp_direction": monotonicity(mean_iavp),
        "evp_direction": monotonicity(u_evp_t),
    }
    write_json(out / "dynamic_summary.json", summary)
    _manifest(out, "dynamic", cfg, artifacts + ["dynamic_summary.json"])
    return summary


def _lattice(cfg: ScenarioConfig, scenario):
    lc = cfg.lattice
    p0 = scenario.market.p0
    p_range = (lc.p_min if lc.p_min is not None else p0 / 5.0, lc.p_max if lc.p_max is not None else 5.0 * p0)
    return build_g_lattice(scenario.market, scenario.prefs, lc.n_t, lc.n_p, p_range, lc.n_reps, cfg.seed,
                           cfg.grid.n_steps, chunk_size=cfg.mc.chunk_size, threads=cfg.mc.threads)


def run_g_lattice(cfg: ScenarioConfig, out=None) -> dict:
    """Tabulate ``g`` and ``∂g/∂p``; writes ``g_lattice.csv``."""
    out = _out_dir(cfg, out)
    sc = build_scenario(cfg)
    lat = _lattice(cfg, sc)
    lat.to_csv(out / "g_lattice.csv")
    diag = lat.growth_diagnostics()
    write_json(out / "g_lattice_summary.json", diag)
    _manifest(out, "g-lattice", cfg, ["g_lattice.csv", "g_lattice_summary.json"])
    return diag


def optimal_field(cfg: ScenarioConfig, scenario, lattice=None):
    """Optimal strategy field: ``u*`` surface over the probe box and ``w*`` lattice."""
    lo, hi = _probe_bounds(cfg)
    T = scenario.prefs.horizon
    surface = scenario.reinsurance.surface(np.linspace(0.0, T, cfg.probe.n_t), np.linspace(lo, hi, cfg.probe.n_y))
    lattice = lattice if lattice is not None else _lattice(cfg, scenario)
    return StrategyField.optimal(surface, lattice), surface, lattice


def run_dominance(cfg: ScenarioConfig, out=None) -> dict:
    """Utility tournament of the optimal strategy against 24 challengers."""
    out = _out_dir(cfg, out)
    sc = build_scenario(cfg)
    _require_valid(sc, cfg)
    field, surface, lattice = optimal_field(cfg, sc)
    surface.to_csv(out / "strategy_surface.csv")
    lattice.to_csv(out / "g_lattice.csv")
    rep = dominance_tournament(sc, field, cfg.mc.n_reps, cfg.seed, cfg.mc.chunk_size, cfg.mc.threads)
    write_csv(out / "dominance.csv", ["strategy", "mean_utility", "se", "diff_vs_optimal", "se_diff", "passed"],
              rep.rows())
    summary = {"optimal_mean_utility": rep.optimal_utility, "optimal_se": rep.optimal_se,
               "all_pass": rep.all_pass, "n_reps": rep.n_reps, "seed": rep.seed,
               "failures": [e.name for e in rep.entries if not e.passed]}
    write_json(out / "dominance_summary.json", summary)
    _manifest(out, "dominance", cfg,
              ["strategy_surface.csv", "g_lattice.csv", "dominance.csv", "dominance_summary.json"])
    return summary


def run_variance_check(cfg: ScenarioConfig, out=None) -> dict:
    """Variance decomposition of ceded claims and the premium dominance check for constant ``u``."""
    out = _out_dir(cfg, out)
    sc = build_scenario(cfg)
    u = cfg.variance_check.u
    u_map = lambda t, y: np.full(np.broadcast(np.asarray(t), np.asarray(y)).shape, u)
    vr = variance_decomposition(u_map, sc, cfg.mc.n_reps, cfg.seed, cfg.mc.chunk_size, cfg.mc.threads)
    doc = {"variance_decomposition": vr.as_dict()}
    if sc.principle.kind.value == "iavp":
        dr = iavp_dominance_check(u_map, sc, cfg.mc.n_reps, cfg.seed, cfg.mc.chunk_size, cfg.mc.threads)
        doc["premium_dominance"] = dr.as_dict()
    write_json(out / "variance_check.json", _json_safe(doc))
    _manifest(out, "variance-check", cfg, ["variance_check.json"])
    return doc


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj
