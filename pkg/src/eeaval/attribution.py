"""Risk ratio, fraction of attributable risk and average treatment effect.

RR is always reported warmer-over-cooler, so RR > 1 means warming raises
the risk. Against a pre-industrial counterfactual the factual world is the
warmer one; against an end-of-century projection the counterfactual is.
ATE follows the same orientation (warmer minus cooler).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import errors
from ._rng import derive_rng
from .data import PRE_INDUSTRIAL, SSP585_EOC, OBSERVED, ScenarioDataset
from .io import csv_bytes
from .parallel import pmap

ESTIMATORS = ("MeanPrediction", "PPI", "PPIWeighted")
MAX_SKIP_FRACTION = 0.10
CSV_FIELDS = ("comparison", "model", "estimator", "rr", "far", "ate", "ci_lo", "ci_hi", "B", "seed")


@dataclass(frozen=True)
class ComparisonSpec:
    name: str
    factual_scenario: str
    counterfactual_scenario: str
    factual_is_warmer: bool

    @classmethod
    def preindustrial(cls):
        return cls("preindustrial", OBSERVED, PRE_INDUSTRIAL, True)

    @classmethod
    def ssp585(cls):
        return cls("ssp585", OBSERVED, SSP585_EOC, False)

    @classmethod
    def from_name(cls, name: str):
        table = {"preindustrial": cls.preindustrial, "ssp585": cls.ssp585}
        try:
            return table[name.lower()]()
        except KeyError:
            raise ValueError(f"unknown comparison {name!r}; choose from {sorted(table)}") from None

    def swapped(self):
        """Same scenarios with warmer/cooler roles exchanged."""
        return ComparisonSpec(self.name + ":swapped", self.factual_scenario,
                              self.counterfactual_scenario, not self.factual_is_warmer)

    def orient(self, p_factual, p_cf):
        """(p_warmer, p_cooler)."""
        return (p_factual, p_cf) if self.factual_is_warmer else (p_cf, p_factual)


@dataclass(frozen=True)
class AttributionEstimate:
    rr: float
    far: float
    ate: float
    ci_rr: tuple
    estimator: str
    p_warmer: float
    p_cooler: float
    comparison: str = ""
    model: str = ""
    B: int = 0
    seed: int | None = None
    n_skipped: int = 0
    orientation: str = "WarmerOverCooler"

    @property
    def ci_lo(self):
        return self.ci_rr[0]

    @property
    def ci_hi(self):
        return self.ci_rr[1]

    def to_dict(self):
        return {"comparison": self.comparison, "model": self.model, "estimator": self.estimator,
                "rr": self.rr, "far": self.far, "ate": self.ate, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "B": self.B, "seed": self.seed, "p_warmer": self.p_warmer,
                "p_cooler": self.p_cooler, "n_skipped": self.n_skipped,
                "orientation": self.orientation}

    def to_json(self):
        d = {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in self.to_dict().items()}
        return json.dumps(d, sort_keys=True)

    def csv_row(self):
        d = self.to_dict()
        return [d[f] for f in CSV_FIELDS]


def estimates_csv(estimates) -> bytes:
    return csv_bytes(CSV_FIELDS, [e.csv_row() for e in estimates])


def _from_means(p_factual, p_cf, comparison):
    if not p_factual > 0:
        raise errors.ZeroMean(f"factual mean is {p_factual!r}; RR is undefined")
    if not p_cf > 0:
        raise errors.ZeroMean(f"counterfactual mean is {p_cf!r}; RR is undefined")
    warm, cool = comparison.orient(float(p_factual), float(p_cf))
    rr = warm / cool
    return rr, 1.0 - 1.0 / rr, warm - cool, warm, cool


def _y_vector(y_factual):
    if isinstance(y_factual, ScenarioDataset):
        if y_factual.outcome is None:
            raise errors.MissingColumn(f"{y_factual.scenario_id} has no outcome column")
        return np.asarray(y_factual.outcome, dtype=np.float64), y_factual.day_id
    return np.asarray(y_factual, dtype=np.float64).ravel(), None


def _check_aligned(n, day_id, *sets):
    for ps in sets:
        if ps is None:
            continue
        if len(ps) != n:
            raise errors.MisalignedPair(f"{ps.scenario_id} predictions have {len(ps)} rows, expected {n}")
        if day_id is not None and not np.array_equal(ps.day_id, day_id):
            bad = int(np.flatnonzero(ps.day_id != day_id)[0])
            raise errors.MisalignedPair(
                f"day_id mismatch at row {bad}: {int(day_id[bad])} vs {int(ps.day_id[bad])}")
        if day_id is None:
            day_id = ps.day_id
    return day_id


def _weighted_mean(x, w):
    if w is None:
        return float(np.mean(x))
    s = float(w.sum())
    if s <= 0:
        raise errors.AllZeroWeights("all weights are zero")
    return float(w @ x) / s


def _rectified_mean(y, pf, pcf, w):
    return float(np.mean(pcf)) + (_weighted_mean(y, w) - _weighted_mean(pf, w))


def ppi_mean(y_factual, preds_factual_oos, preds_cf, weights=None) -> float:
    """Counterfactual mean with the factual-sample rectifier added.

    mean(p_cf) + (mean(y) - mean(p_factual)); with ``weights`` the two
    factual means are weighted means, which reweights the rectifier toward
    the counterfactual covariate distribution.
    """
    if not preds_factual_oos.out_of_sample:
        raise errors.InSampleLeakage(
            "factual predictions must be out-of-sample (cross-fitted) for the rectifier")
    y, day_id = _y_vector(y_factual)
    _check_aligned(len(y), day_id, preds_factual_oos, preds_cf)
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    return _rectified_mean(y, preds_factual_oos.probs, preds_cf.probs, w)


def _cf_mean(estimator, y, pf, pcf, w):
    if estimator == "MeanPrediction":
        return float(np.mean(pcf))
    if estimator == "PPI":
        return _rectified_mean(y, pf, pcf, None)
    return _rectified_mean(y, pf, pcf, w)


def _validate_estimator(estimator, preds_factual_oos, weights):
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if estimator != "MeanPrediction":
        if preds_factual_oos is None:
            raise ValueError(f"{estimator} needs out-of-sample factual predictions")
        if not preds_factual_oos.out_of_sample:
            raise errors.InSampleLeakage(
                "factual predictions must be out-of-sample (cross-fitted) for the rectifier")
    if estimator == "PPIWeighted" and weights is None:
        raise ValueError("PPIWeighted needs importance weights")


def estimate_attribution(y_factual, preds_cf, comparison: ComparisonSpec, *,
                         estimator="MeanPrediction", preds_factual_oos=None, weights=None,
                         B=0, seed=0, level=0.95, workers=1, model_label=None) -> AttributionEstimate:
    """Point estimate of RR/FAR/ATE, plus a paired bootstrap interval when B > 0."""
    _validate_estimator(estimator, preds_factual_oos, weights)
    y, day_id = _y_vector(y_factual)
    _check_aligned(len(y), day_id, preds_cf, preds_factual_oos)
    pf = None if preds_factual_oos is None else preds_factual_oos.probs
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    if w is not None and w.shape != y.shape:
        raise errors.MisalignedPair("weights are not aligned with the factual rows")
    rr, far, ate, warm, cool = _from_means(float(np.mean(y)), _cf_mean(estimator, y, pf, preds_cf.probs, w),
                                           comparison)
    ci, skipped = (float("nan"), float("nan")), 0
    if B:
        lo, hi, skipped = bootstrap_ci((y, preds_cf.probs, pf, w), estimator, B, level, seed,
                                       comparison=comparison, workers=workers)
        ci = (lo, hi)
    return AttributionEstimate(rr, far, ate, ci, estimator, warm, cool, comparison.name,
                               model_label or preds_cf.model_label, int(B),
                               int(seed) if B else None, skipped)


def _replicate_chunk(bs, rows, estimator, seed, comparison):
    y, pcf, pf, w = rows
    n = len(y)
    out = np.full(len(bs), np.nan)
    for i, b in enumerate(bs):
        idx = derive_rng(seed, "bootstrap", b).integers(0, n, size=n)
        yb = y[idx]
        if not yb.any():
            continue
        cf = _cf_mean(estimator, yb, None if pf is None else pf[idx], pcf[idx],
                      None if w is None else w[idx])
        try:
            out[i] = _from_means(float(np.mean(yb)), cf, comparison)[0]
        except errors.ZeroMean:
            continue
    return out


def bootstrap_ci(paired_rows, estimator="MeanPrediction", B=1000, level=0.95, seed=0, *,
                 comparison: ComparisonSpec | None = None, workers=1):
    """Percentile interval for RR from resampling days jointly.

    ``paired_rows`` is ``(y, p_cf, p_factual_or_None, weights_or_None)``
    aligned by day. Replicate ``b`` draws from an RNG derived from
    ``(seed, b)``, so the interval does not depend on ``workers``.
    Returns ``(lo, hi, n_skipped)``.
    """
    if B < 100:
        raise ValueError(f"B must be >= 100, got {B}")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    comparison = comparison or ComparisonSpec.preindustrial()
    y, pcf, pf, w = paired_rows
    rows = (np.asarray(y, dtype=np.float64), np.asarray(pcf, dtype=np.float64),
            None if pf is None else np.asarray(pf, dtype=np.float64),
            None if w is None else np.asarray(w, dtype=np.float64))
    n_chunks = max(1, workers) * 4 if workers and workers > 1 else 1
    chunks = [c.tolist() for c in np.array_split(np.arange(B), n_chunks)]
    parts = pmap(partial(_replicate_chunk, rows=rows, estimator=estimator, seed=seed,
                         comparison=comparison), chunks, workers)
    stats = np.concatenate(parts)
    ok = stats[~np.isnan(stats)]
    skipped = B - ok.size
    if skipped > MAX_SKIP_FRACTION * B:
        raise errors.DegenerateResample(
            f"{skipped} of {B} resamples had no factual positives (limit {MAX_SKIP_FRACTION:.0%})")
    alpha = 100 * (1 - level) / 2
    lo, hi = np.percentile(ok, [alpha, 100 - alpha])
    return float(lo), float(hi), int(skipped)


def per_event_rr(model, x_factual_day, x_cf_day, comparison: ComparisonSpec):
    """Per-day ratio of predicted probability under the warmer scenario's
    predictors to that under the cooler scenario's, for the same day.

    Accepts datasets, 2-D feature arrays or single feature rows; returns a
    float for a single row and an array otherwise.
    """
    def feats(x):
        if isinstance(x, ScenarioDataset):
            return x.features
        return np.atleast_2d(np.asarray(x, dtype=np.float64))

    xf, xc = feats(x_factual_day), feats(x_cf_day)
    if xf.shape != xc.shape:
        raise errors.MisalignedPair(f"factual rows {xf.shape} vs counterfactual rows {xc.shape}")
    pf, pc = model.predict_array(xf), model.predict_array(xc)
    warm, cool = comparison.orient(pf, pc)
    rr = warm / cool
    single = not isinstance(x_factual_day, ScenarioDataset) and np.ndim(x_factual_day) == 1
    return float(rr[0]) if single else rr
