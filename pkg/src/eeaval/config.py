"""Run configuration: a flat ``key = value`` text file.

Grammar (UTF-8)::

    # comment                     whole-line comments start with '#'
    key = value                   one pair per line; whitespace around '=' is ignored
    list_key = a, b, c            comma-separated lists

Keys are lowercase identifiers; each key may appear once; keys not listed in
``SCHEMA`` are rejected. Values are parsed according to the key's type.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from . import errors
from .models.zoo import ALGORITHMS

_KEY = re.compile(r"^[a-z][a-z0-9_]*$")
_ALGOS = tuple(ALGORITHMS)


def _bool(v):
    t = v.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {list(options)}, got {v!r}")
        return v
    return parse


def _list_of(options=None):
    def parse(v):
        items = [s.strip() for s in v.split(",") if s.strip()]
        if not items:
            raise ValueError("empty list")
        if options is not None:
            bad = [s for s in items if s not in options]
            if bad:
                raise ValueError(f"unknown item(s) {bad}; choose from {list(options)}")
        return items
    return parse


def _opt_float(v):
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


# key -> (parser, default, description)
SCHEMA = {
    "seed": (int, 0, "master seed; every random stream derives from it"),
    "workers": (int, 1, "worker processes"),
    "out": (str, "out", "output directory"),
    "comparison": (_choice("preindustrial", "ssp585"), "preindustrial", "scenario comparison"),
    "population": (_choice("extreme", "all"), "extreme", "days used for per-event auditing"),
    # data
    "factual": (str, "", "factual CSV path; empty means generate synthetic data"),
    "counterfactual": (str, "", "counterfactual CSV path"),
    "n_days": (int, 20000, "synthetic days"),
    "year_start": (int, 2003, "first synthetic year"),
    "year_end": (int, 2020, "last synthetic year"),
    "base_rate": (float, 0.021, "synthetic factual event rate"),
    "temperature_shift": (_opt_float, None,
                          "counterfactual warming in degrees C; auto = -1.2 (preindustrial) or +3.0 (ssp585)"),
    "temperature_quadratic": (float, 2.0, "hot-side quadratic temperature term of the synthetic truth"),
    "quadratic_knot": (float, 1.0, "temperature (in sd above the mean) where the quadratic term starts"),
    "design_seed": (int, 0, "seed of the synthetic predictors"),
    "data_seed": (int, 1, "seed of the synthetic outcomes"),
    # models
    "models": (_list_of(_ALGOS), list(_ALGOS), "algorithms in the zoo"),
    "model_scale": (_choice("full", "desk"), "full", "full-size or desk-size ensembles"),
    "tune": (_bool, False, "nested CV tuning over the default grids"),
    "tune_criterion": (_choice("auc", "brier", "brier_skill", "mean_calibration_error", "log_loss"),
                       "log_loss", "CV tuning criterion"),
    "block_years": (int, 3, "years per temporal fold block"),
    # attribution
    "estimators": (_list_of(("MeanPrediction", "PPI", "PPIWeighted")),
                   ["MeanPrediction", "PPI", "PPIWeighted"], "attribution estimators"),
    "bootstrap_b": (int, 1000, "bootstrap replicates"),
    "level": (float, 0.95, "interval level"),
    # simulation
    "replicates": (int, 100, "replicates per truth"),
    "truths": (_list_of(_ALGOS), list(_ALGOS), "algorithms used to define truth scenarios"),
    "regret_samples": (int, 1000, "sampled comparisons for regret"),
    "regret_size": (int, 50, "replicate groups per sampled comparison"),
    "permutations": (int, 0, "permutation p-value draws (0 = t approximation)"),
    # shift
    "propensity_model": (_choice(*_ALGOS), "GradientBoostHistLeafwise", "propensity learner"),
    "subgroup_model": (_choice(*_ALGOS), "LogisticRegression", "learner for the temperature subgroup curve"),
    "bins": (int, 8, "temperature subgroups"),
}


NON_SEMANTIC = ("workers", "out")


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> str:
        """Sorted ``key=value`` lines. ``workers`` and ``out`` are left out
        because they change where and how fast, never what, is computed."""
        lines = []
        for k in sorted(self.values):
            if k in NON_SEMANTIC:
                continue
            v = self.values[k]
            if isinstance(v, list):
                v = ",".join(v)
            elif isinstance(v, bool):
                v = str(v).lower()
            elif v is None:
                v = "auto"
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_overrides(self, **kw):
        vals = dict(self.values)
        for k, v in kw.items():
            if v is None:
                continue
            if k not in SCHEMA:
                raise errors.ConfigParse(f"unknown key {k!r}")
            vals[k] = v
        return RunConfig(vals)


def defaults() -> RunConfig:
    return RunConfig({k: (list(d) if isinstance(d, list) else d) for k, (_, d, _) in SCHEMA.items()})


def parse_config(text: str, source="<config>") -> RunConfig:
    vals = defaults().values
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise errors.ConfigParse(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise errors.ConfigParse(f"{source}:{lineno}: invalid key {key!r}")
        if key not in SCHEMA:
            raise errors.ConfigParse(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise errors.ConfigParse(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            vals[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise errors.ConfigParse(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return RunConfig(vals)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise errors.IoFailure(f"cannot read config {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise errors.ConfigParse(f"{path}: not UTF-8 ({exc})") from exc
    return parse_config(text, str(path))
