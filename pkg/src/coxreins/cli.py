"""Command-line entry point: ``coxreins <verb> --config scenario.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config, with_changes
from .errors import AssumptionsViolated, ConfigInvalid, CoxReinsError
from . import experiments

VERBS = {
    "validate": experiments.run_validate,
    "sweep": experiments.run_sweep,
    "dynamic": experiments.run_dynamic,
    "g-lattice": experiments.run_g_lattice,
    "dominance": experiments.run_dominance,
    "variance-check": experiments.run_variance_check,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coxreins", description="Optimal reinsurance and investment experiments.")
    p.add_argument("verb", choices=sorted(VERBS))
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--reps", type=int, help="override mc.n_reps")
    p.add_argument("--threads", type=int, help="override mc.threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.reps is not None:
            overrides["mc.n_reps"] = args.reps
        if args.threads is not None:
            overrides["mc.threads"] = args.threads
        if overrides:
            cfg = with_changes(cfg, **overrides)
        result = VERBS[args.verb](cfg, args.out)
    except ConfigInvalid as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except AssumptionsViolated as exc:
        print(str(exc), file=sys.stderr)
        print(exc.report.to_text(), file=sys.stderr)
        return 3
    except CoxReinsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    if args.verb == "validate" and not result.get("ok", True):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
