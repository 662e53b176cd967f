"""Command-line front end.

``eeaval <command> [--config PATH] [--seed N] [--workers N] [--out DIR]
[--population {extreme,all}] [--comparison {preindustrial,ssp585}]``

Every output is written atomically and embeds the config hash and master
seed; rerunning a command with the same config and seed reproduces its
outputs byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import errors
from ._rng import derive_seed
from .attribution import ComparisonSpec, estimate_attribution, estimates_csv
from .config import defaults, load_config
from .data import (OBSERVED, GeneratorConfig, SyntheticTruth, generate_synthetic, ingest_csv,
                   plan_temporal_folds)
from .io import atomic_write_bytes, csv_bytes, json_bytes
from .models import ModelSpec, cross_fit, default_grid, fit, predict_proba, zoo_specs
from .multiplicity import multiplicity_report
from .shift import fit_propensity, importance_weights, shift_report
from .simlab import build_truth, correlate, regret, rows_csv_bytes, run_simulation

COMMANDS = ("generate", "attribute", "simulate", "shift", "multiplicity", "report")
DEFAULT_SHIFT = {"preindustrial": -1.2, "ssp585": 3.0}
CF_SCENARIO = {"preindustrial": "PreIndustrial", "ssp585": "SSP585_EOC"}
SIM_METRICS = ("auc", "brier", "brier_skill", "mce", "oos_auc", "oos_brier", "oos_brier_skill", "oos_mce")
REGRET_METRICS = ("auc", "brier", "brier_skill", "mce")


def _stamp(cfg, command):
    return {"command": command, "config_hash": cfg.config_hash, "seed": cfg["seed"]}


def _write(cfg, name, data: bytes):
    atomic_write_bytes(os.path.join(cfg["out"], name), data)


def _generator_config(cfg):
    shift = cfg["temperature_shift"]
    if shift is None:
        shift = DEFAULT_SHIFT[cfg["comparison"]]
    return GeneratorConfig(n_days=cfg["n_days"], start_year=cfg["year_start"], end_year=cfg["year_end"],
                           temperature_shift=shift, base_rate=cfg["base_rate"],
                           temperature_quadratic=cfg["temperature_quadratic"],
                           quadratic_knot=cfg["quadratic_knot"],
                           design_seed=cfg["design_seed"], name=f"{cfg['comparison']}")


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise errors.IoFailure(f"cannot read {path}: {exc}") from exc


def load_data(cfg):
    """(factual, counterfactual, truth or None) from files or the generator."""
    if cfg["factual"]:
        if not cfg["counterfactual"]:
            raise errors.ConfigParse("'factual' is set but 'counterfactual' is not")
        factual = ingest_csv(_read_bytes(cfg["factual"]), OBSERVED)
        cf = ingest_csv(_read_bytes(cfg["counterfactual"]), CF_SCENARIO[cfg["comparison"]])
        return factual, cf, None
    return generate_synthetic(_generator_config(cfg), derive_seed(cfg["seed"], "data", cfg["data_seed"]))


def _specs(cfg, names=None, purpose="model"):
    return [s.with_seed(derive_seed(cfg["seed"], purpose, s.algorithm))
            for s in zoo_specs(cfg["model_scale"], names or cfg["models"])]


def _truth_summary(truth: SyntheticTruth | None, comparison):
    if truth is None:
        return None
    mu0, mu1 = float(truth.pi0.mean()), float(truth.pi1.mean())
    warm, cool = comparison.orient(mu0, mu1)
    return {"mu_factual": mu0, "mu_counterfactual": mu1, "rr_star": warm / cool,
            "far_star": 1 - cool / warm, "ate_star": warm - cool}


# -- commands ----------------------------------------------------------------

def cmd_generate(cfg):
    factual, cf, truth = load_data(cfg)
    comparison = ComparisonSpec.from_name(cfg["comparison"])
    _write(cfg, "observed.csv", factual.to_csv_bytes())
    _write(cfg, "counterfactual.csv", cf.to_csv_bytes())
    if truth is not None:
        _write(cfg, "truth.csv", csv_bytes(("day_id", "pi0", "pi1"),
                                           zip(truth.day_id.tolist(), truth.pi0.tolist(), truth.pi1.tolist())))
    report = {**_stamp(cfg, "generate"), "n_days": len(factual), "prevalence": factual.prevalence(),
              "truth": _truth_summary(truth, comparison),
              "generator": None if truth is None else truth.generator_params}
    _write(cfg, "generate.json", json_bytes(report))


def cmd_attribute(cfg):
    factual, cf, truth = load_data(cfg)
    comparison = ComparisonSpec.from_name(cfg["comparison"])
    folds = plan_temporal_folds(factual, cfg["block_years"])
    weights = None
    if "PPIWeighted" in cfg["estimators"]:
        prop = ModelSpec(cfg["propensity_model"], {}, derive_seed(cfg["seed"], "propensity"))
        sf, _ = fit_propensity(factual, cf, folds, prop, cfg["workers"])
        weights = importance_weights(sf)
    estimates = []
    for spec in _specs(cfg):
        grid = default_grid(spec.algorithm, seed=spec.seed) if cfg["tune"] else None
        oos, (cfp,) = cross_fit(spec, factual, folds, [cf], grid=grid,
                                criterion=cfg["tune_criterion"], workers=cfg["workers"])
        for est in cfg["estimators"]:
            estimates.append(estimate_attribution(
                factual, cfp, comparison, estimator=est, preds_factual_oos=oos, weights=weights,
                B=cfg["bootstrap_b"], seed=derive_seed(cfg["seed"], "bootstrap", spec.algorithm, est),
                level=cfg["level"], workers=cfg["workers"], model_label=spec.describe()))
    _write(cfg, "attribution.csv", estimates_csv(estimates))
    report = {**_stamp(cfg, "attribute"), "comparison": comparison.name,
              "truth": _truth_summary(truth, comparison),
              "estimates": [e.to_dict() for e in estimates]}
    _write(cfg, "attribution.json", json_bytes(report))


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw).to_dict()
    except (errors.EEAError, ValueError) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def cmd_simulate(cfg):
    factual, cf, _ = load_data(cfg)
    comparison = ComparisonSpec.from_name(cfg["comparison"])
    folds = plan_temporal_folds(factual, cfg["block_years"])
    truths = []
    for spec in _specs(cfg, cfg["truths"], purpose="truth"):
        model = fit(spec, factual)
        truths.append(build_truth(predict_proba(model, factual), predict_proba(model, cf),
                                  spec.algorithm, comparison))
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "sim_results.csv")
    meta_path = os.path.join(cfg["out"], "sim_results.meta")
    stale = not os.path.exists(meta_path) or _read_bytes(meta_path).decode() != cfg.config_hash
    if stale and os.path.exists(path):
        os.unlink(path)
    atomic_write_bytes(meta_path, cfg.config_hash.encode())
    rows, skipped = run_simulation(truths, factual, cf, _specs(cfg), folds, cfg["replicates"],
                                   cfg["seed"], workers=cfg["workers"], out_csv=path)
    # Rewrite in canonical order so a resumed run ends byte-identical to a fresh one.
    _write(cfg, "sim_results.csv", rows_csv_bytes(rows))
    errs = {"MeanPrediction": [r.abs_log_rr_error for r in rows],
            "PPI": [r.ppi_abs_log_rr_error for r in rows]}
    report = {
        **_stamp(cfg, "simulate"), "comparison": comparison.name, "n_rows": len(rows),
        "skipped_replicates": [list(s) for s in skipped],
        "truths": [{"label": t.label, "mu0": t.mu0, "mu1": t.mu1, "rr_star": t.rr_star,
                    "far_star": t.far_star, "ate_star": t.ate_star} for t in truths],
        "correlations": {m: _safe(correlate, rows, m, permutations=cfg["permutations"],
                                  seed=derive_seed(cfg["seed"], "permutation"))
                         for m in SIM_METRICS},
        "regret": {m: _safe(regret, rows, m, cfg["regret_samples"], cfg["regret_size"],
                            derive_seed(cfg["seed"], "regret"))
                   for m in REGRET_METRICS},
        "estimator_errors": {k: {"median": float(np.nanmedian(v)) if v else None,
                                 "mean": float(np.nanmean(v)) if v else None}
                             for k, v in errs.items()},
    }
    _write(cfg, "simulate.json", json_bytes(report))


def cmd_shift(cfg):
    factual, cf, _ = load_data(cfg)
    folds = plan_temporal_folds(factual, cfg["block_years"])
    prop = ModelSpec(cfg["propensity_model"], {}, derive_seed(cfg["seed"], "propensity"))
    sub_spec = ModelSpec(cfg["subgroup_model"], {}, derive_seed(cfg["seed"], "subgroup"))
    oos, _ = cross_fit(sub_spec, factual, folds, [], workers=cfg["workers"])
    rep = shift_report(factual, cf, folds, prop, oos, cfg["bins"], cfg["workers"])
    _write(cfg, "shift.json", json_bytes({**_stamp(cfg, "shift"), **rep.to_dict()}))
    _write(cfg, "shift_subgroups.csv", rep.subgroup_csv())
    _write(cfg, "shift_pca.csv", rep.pca_csv())
    _write(cfg, "propensity.csv", csv_bytes(
        ("day_id", "score_factual", "score_counterfactual"),
        zip(factual.day_id.tolist(), rep.propensity_factual.tolist(), rep.propensity_cf.tolist())))


def cmd_multiplicity(cfg):
    factual, cf, truth = load_data(cfg)
    comparison = ComparisonSpec.from_name(cfg["comparison"])
    specs = _specs(cfg)
    models = [fit(s, factual) for s in specs]
    rep = multiplicity_report(models, factual, cf, comparison, cfg["population"],
                              [s.describe() for s in specs])
    _write(cfg, "per_event_rr.csv", rep.per_event.long_csv())
    _write(cfg, "multiplicity.json", json_bytes({**_stamp(cfg, "multiplicity"), **rep.to_dict(),
                                                 "truth": _truth_summary(truth, comparison)}))


REPORT_INPUTS = ("generate.json", "attribution.json", "simulate.json", "shift.json", "multiplicity.json")


def cmd_report(cfg):
    """Index of the outputs present in ``out`` with their digests."""
    out = cfg["out"]
    files, sections = {}, {}
    if os.path.isdir(out):
        for name in sorted(os.listdir(out)):
            path = os.path.join(out, name)
            if name.startswith(".") or name in ("report.json",) or not os.path.isfile(path):
                continue
            files[name] = hashlib.sha256(_read_bytes(path)).hexdigest()
            if name in REPORT_INPUTS:
                doc = json.loads(_read_bytes(path))
                sections[name[:-5]] = {k: doc[k] for k in ("command", "config_hash", "seed") if k in doc}
    if not files:
        raise errors.IoFailure(f"no outputs found in {out!r}")
    _write(cfg, "report.json", json_bytes({**_stamp(cfg, "report"), "files": files, "sections": sections}))


HANDLERS = {"generate": cmd_generate, "attribute": cmd_attribute, "simulate": cmd_simulate,
            "shift": cmd_shift, "multiplicity": cmd_multiplicity, "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="eeaval", description="Attribution-accuracy evaluation toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    ap.add_argument("--population", choices=("extreme", "all"))
    ap.add_argument("--comparison", choices=("preindustrial", "ssp585"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else defaults()
        cfg = cfg.with_overrides(seed=args.seed, workers=args.workers, out=args.out,
                                 population=args.population, comparison=args.comparison)
        HANDLERS[args.command](cfg)
    except errors.ConfigParse as exc:
        print(f"eeaval {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except errors.EEAError as exc:
        print(f"eeaval {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
