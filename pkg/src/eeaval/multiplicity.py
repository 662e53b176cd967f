"""Cross-model disagreement on per-day and aggregate risk ratios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .attribution import ComparisonSpec
from .data import ScenarioDataset, check_pairing
from .io import csv_bytes, json_bytes
from .models.zoo import PROB_FLOOR

POPULATIONS = {"extreme": "ExtremeDays", "all": "AllFireDays"}


@dataclass(frozen=True, eq=False)
class PerEventMatrix:
    """RR of every model (columns) on every day (rows)."""
    day_id: np.ndarray
    models: tuple
    rr: np.ndarray
    floored: np.ndarray = None  # True where a model's probability hit the floor

    def __post_init__(self):
        rr = np.asarray(self.rr, dtype=np.float64)
        if rr.ndim != 2 or rr.shape != (len(self.day_id), len(self.models)):
            raise ValueError(f"rr has shape {rr.shape}, expected ({len(self.day_id)}, {len(self.models)})")
        object.__setattr__(self, "rr", rr)
        if self.floored is None:
            object.__setattr__(self, "floored", np.zeros(rr.shape, dtype=bool))

    def long_csv(self) -> bytes:
        rows = [(int(d), m, self.rr[i, j], bool(self.floored[i, j]))
                for i, d in enumerate(self.day_id) for j, m in enumerate(self.models)]
        return csv_bytes(("day_id", "model", "rr", "floored"), rows)


def per_event_matrix(models, factual: ScenarioDataset, cf: ScenarioDataset,
                     comparison: ComparisonSpec, labels=None, day_mask=None) -> PerEventMatrix:
    """Per-day warmer-over-cooler RR for each trained model."""
    cf = check_pairing(factual, cf)
    if day_mask is not None:
        idx = np.flatnonzero(day_mask)
        factual, cf = factual.take(idx), cf.take(idx)
    labels = tuple(labels or [m.spec.describe() for m in models])
    cols, flags = [], []
    for m in models:
        pf, pc = m.predict_array(factual.features), m.predict_array(cf.features)
        warm, cool = comparison.orient(pf, pc)
        cols.append(warm / cool)
        flags.append((pf <= PROB_FLOOR) | (pc <= PROB_FLOOR) |
                     (pf >= 1 - PROB_FLOOR) | (pc >= 1 - PROB_FLOOR))
    return PerEventMatrix(factual.day_id, labels, np.column_stack(cols), np.column_stack(flags))


def _matrix(m):
    rr = m.rr if isinstance(m, PerEventMatrix) else np.asarray(m, dtype=np.float64)
    if rr.ndim != 2:
        raise ValueError("per-event matrix must be 2-D (days x models)")
    return rr


def sign_conflict_fraction(per_event) -> float:
    """Fraction of days on which the models' RRs straddle 1."""
    rr = _matrix(per_event)
    if rr.shape[1] < 2:
        raise errors.SingleModel("sign conflicts need at least two models")
    if (rr <= 0).any():
        raise errors.NonPositiveRR("risk ratios must be > 0")
    lr = np.log(rr)
    return float(np.mean((lr.min(axis=1) < 0) & (lr.max(axis=1) > 0)))


def range_factors(per_event) -> np.ndarray:
    rr = _matrix(per_event)
    if not (rr > 0).all():
        raise errors.NonPositiveRR("risk ratios must be > 0")
    return rr.max(axis=1) / rr.min(axis=1)


def range_factor_summary(per_event):
    """(median, p5, p95) of the per-day max/min factor across models."""
    f = range_factors(per_event)
    p5, med, p95 = np.percentile(f, [5, 50, 95])
    return float(med), float(p5), float(p95)


def aggregate_comparison(aggregate_rr: dict, per_event_summary) -> dict:
    vals = np.array(list(aggregate_rr.values()), dtype=np.float64)
    if not (vals > 0).all():
        raise errors.NonPositiveRR("aggregate risk ratios must be > 0")
    factor = float(vals.max() / vals.min())
    median = per_event_summary[0] if isinstance(per_event_summary, (tuple, list)) else float(per_event_summary)
    lv = np.log(vals)
    return {
        "aggregate_range_factor": factor,
        "median_per_event_range_factor": float(median),
        "aggregate_more_robust": bool(factor < median),
        "aggregate_sign_conflict": bool(lv.min() < 0 < lv.max()),
    }


def aggregate_rrs(models, factual, cf, comparison, labels=None, day_mask=None) -> dict:
    """Ratio of mean predicted probability under warmer vs cooler predictors."""
    cf = check_pairing(factual, cf)
    if day_mask is not None:
        idx = np.flatnonzero(day_mask)
        factual, cf = factual.take(idx), cf.take(idx)
    labels = labels or [m.spec.describe() for m in models]
    out = {}
    for label, m in zip(labels, models):
        warm, cool = comparison.orient(float(m.predict_array(factual.features).mean()),
                                       float(m.predict_array(cf.features).mean()))
        out[label] = warm / cool
    return out


@dataclass(frozen=True, eq=False)
class MultiplicityReport:
    comparison: str
    population: str
    per_event: PerEventMatrix
    sign_conflict_fraction: float
    median_range_factor: float
    range_factor_p5: float
    range_factor_p95: float
    aggregate_rr: dict
    aggregate: dict
    n_floored_days: int

    def to_dict(self):
        return {
            "comparison": self.comparison, "population": self.population,
            "n_days": int(len(self.per_event.day_id)), "models": list(self.per_event.models),
            "sign_conflict_fraction": self.sign_conflict_fraction,
            "median_range_factor": self.median_range_factor,
            "range_factor_interval": [self.range_factor_p5, self.range_factor_p95],
            "range_factor_interval_kind": "p5-p95 across days",
            "aggregate_rr": dict(self.aggregate_rr), **self.aggregate,
            "n_floored_days": self.n_floored_days,
        }

    def to_json_bytes(self) -> bytes:
        return json_bytes(self.to_dict())


def multiplicity_report(models, factual, cf, comparison, population="extreme", labels=None):
    """Per-event and aggregate disagreement for one population of days.

    ``extreme`` keeps days with an observed extreme event (outcome 1);
    ``all`` keeps every fire day.
    """
    if population not in POPULATIONS:
        raise ValueError(f"population must be one of {sorted(POPULATIONS)}")
    mask = None
    if population == "extreme":
        if factual.outcome is None:
            raise errors.MissingColumn("the extreme-day population needs factual outcomes")
        mask = factual.outcome == 1
    pe = per_event_matrix(models, factual, cf, comparison, labels, mask)
    med, p5, p95 = range_factor_summary(pe)
    agg = aggregate_rrs(models, factual, cf, comparison, list(pe.models), mask)
    return MultiplicityReport(comparison.name, POPULATIONS[population], pe,
                              sign_conflict_fraction(pe), med, p5, p95, agg,
                              aggregate_comparison(agg, (med, p5, p95)),
                              int(pe.floored.any(axis=1).sum()))
