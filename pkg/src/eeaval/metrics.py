"""Predictive-performance metrics and the attribution-accuracy target.

All functions take ``(probs, y)`` aligned 1-D arrays. Weighted variants use
Hajek-normalized weights (weighted means), and weighted AUC is the weighted
Mann-Whitney statistic over positive-negative pairs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import errors

LOG_GUARD = 1e-9


def _aligned(probs, y, weights=None):
    p = np.asarray(probs, dtype=np.float64).ravel()
    t = np.asarray(y, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"probs and y have different lengths ({p.size} vs {t.size})")
    if weights is None:
        return p, t
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape != p.shape:
        raise ValueError("weights are not aligned with probs")
    if not np.isfinite(w).all() or (w < 0).any():
        raise ValueError("weights must be finite and >= 0")
    if not (w > 0).any():
        raise errors.AllZeroWeights("all weights are zero")
    return p, t, w


def _weighted_auc(p, t, w):
    pos = t == 1
    neg = ~pos
    wpos, wneg = w[pos].sum(), w[neg].sum()
    if wpos <= 0 or wneg <= 0:
        raise errors.SingleClass("AUC needs positive weight on both classes")
    # Group by distinct score: each positive beats all negative weight strictly
    # below its score and ties with half the negative weight at its score.
    uniq, inv = np.unique(p, return_inverse=True)
    neg_w = np.bincount(inv, weights=np.where(neg, w, 0.0), minlength=uniq.size)
    pos_w = np.bincount(inv, weights=np.where(pos, w, 0.0), minlength=uniq.size)
    neg_below = np.concatenate(([0.0], np.cumsum(neg_w)[:-1]))
    num = float(np.sum(pos_w * (neg_below + 0.5 * neg_w)))
    return num / (wpos * wneg)


def auc(probs, y) -> float:
    """(#concordant + 0.5 #tied) / (#pos * #neg) over positive-negative pairs."""
    p, t = _aligned(probs, y)
    n_pos = int(np.sum(t == 1))
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise errors.SingleClass("AUC is undefined when y has a single class")
    uniq, inv = np.unique(p, return_inverse=True)
    neg_c = np.bincount(inv, weights=(t != 1).astype(np.float64), minlength=uniq.size)
    pos_c = np.bincount(inv, weights=(t == 1).astype(np.float64), minlength=uniq.size)
    neg_below = np.concatenate(([0.0], np.cumsum(neg_c)[:-1]))
    # Integer-valued (x2) numerator keeps the ratio exact for moderate n.
    twice = float(np.sum(pos_c * (2.0 * neg_below + neg_c)))
    return twice / (2.0 * n_pos * n_neg)


def brier(probs, y) -> float:
    p, t = _aligned(probs, y)
    return float(np.mean((p - t) ** 2))


def brier_skill(probs, y) -> float:
    """1 - BS_model / BS_ref, the reference predicting mean(probs) everywhere."""
    p, t = _aligned(probs, y)
    ref = float(np.mean((p.mean() - t) ** 2))
    if ref == 0.0:
        raise errors.DegenerateReference("reference Brier score is zero")
    return 1.0 - float(np.mean((p - t) ** 2)) / ref


def mean_calibration_error(probs, y) -> float:
    p, t = _aligned(probs, y)
    return abs(float(p.mean()) - float(t.mean()))


def log_loss(probs, y) -> float:
    p, t = _aligned(probs, y)
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(t * np.log(p) + (1 - t) * np.log1p(-p)))


def log_rr_error(true_cf_mean: float, est_cf_mean: float) -> float:
    """|log(est) - log(true)|: the log risk-ratio error once the factual
    mean cancels out of both ratios."""
    if not (true_cf_mean >= LOG_GUARD and est_cf_mean >= LOG_GUARD):
        raise errors.NonPositiveMean(
            f"means must be >= {LOG_GUARD:g} (got true={true_cf_mean!r}, est={est_cf_mean!r})"
        )
    return abs(math.log(est_cf_mean) - math.log(true_cf_mean))


REPORT_FIELDS = ("auc", "brier", "brier_skill", "mean_calibration_error", "n", "weights_used")


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    brier: float
    brier_skill: float
    mean_calibration_error: float
    n: int
    weights_used: bool

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv_row(self, header=True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        if header:
            writer.writerow(REPORT_FIELDS)
        writer.writerow([_fmt(getattr(self, f)) for f in REPORT_FIELDS])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _nan_on(exc_types, fn, *args):
    try:
        return fn(*args)
    except exc_types:
        return float("nan")


def metrics_report(probs, y) -> MetricsReport:
    """Unweighted report; AUC/BSS are NaN when undefined (single class)."""
    p, t = _aligned(probs, y)
    return MetricsReport(
        auc=_nan_on(errors.SingleClass, auc, p, t),
        brier=brier(p, t),
        brier_skill=_nan_on(errors.DegenerateReference, brier_skill, p, t),
        mean_calibration_error=mean_calibration_error(p, t),
        n=int(p.size),
        weights_used=False,
    )


def weighted_metrics(probs, y, weights) -> MetricsReport:
    p, t, w = _aligned(probs, y, weights)
    wn = w / w.sum()
    pbar = float(wn @ p)
    bs = float(wn @ (p - t) ** 2)
    ref = float(wn @ (pbar - t) ** 2)
    try:
        wauc = _weighted_auc(p, t, w)
    except errors.SingleClass:
        wauc = float("nan")
    return MetricsReport(
        auc=wauc,
        brier=bs,
        brier_skill=1.0 - bs / ref if ref > 0 else float("nan"),
        mean_calibration_error=abs(pbar - float(wn @ t)),
        n=int(np.count_nonzero(w)),
        weights_used=True,
    )


# Metric id -> (function, higher_is_better)
METRICS = {
    "auc": (auc, True),
    "brier": (brier, False),
    "brier_skill": (brier_skill, True),
    "mean_calibration_error": (mean_calibration_error, False),
    "log_loss": (log_loss, False),
}


def metric_direction(metric_id: str) -> bool:
    try:
        return METRICS[metric_id][1]
    except KeyError:
        raise ValueError(f"unknown metric {metric_id!r}; choose from {sorted(METRICS)}") from None


def evaluate(metric_id: str, probs, y) -> float:
    fn, _ = METRICS[metric_id]
    return fn(probs, y)
