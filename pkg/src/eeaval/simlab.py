"""Truth-known simulation harness.

A truth scenario fixes per-day event probabilities under both scenarios
(usually a fitted model's predictions). Each replicate redraws factual
outcomes from those probabilities with the predictors held fixed, refits
every candidate model, and records how well each model's held-out metrics
and its counterfactual estimate did. The question asked of the rows is
which metric tracks the error of the attribution estimate.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, fields
from functools import partial

import numpy as np
from scipy import stats

from . import errors
from ._rng import derive_rng, derive_seed
from .attribution import ComparisonSpec
from .data import ScenarioDataset, check_pairing, sample_outcomes
from .io import format_value
from .metrics import log_rr_error, metrics_report
from .models.zoo import ModelSpec, PredictionSet, cross_fit
from .parallel import pmap

PROB_FLOOR = 1e-6
# A truth whose mean sits within a few multiples of the floor is all floor.
MIN_TRUTH_MEAN = 10 * PROB_FLOOR


@dataclass(frozen=True, eq=False)
class TruthScenario:
    label: str
    pi0: np.ndarray
    pi1: np.ndarray
    mu0: float
    mu1: float
    rr_star: float
    far_star: float
    ate_star: float
    comparison: ComparisonSpec

    @classmethod
    def from_arrays(cls, label, pi0, pi1, comparison=None):
        comparison = comparison or ComparisonSpec.preindustrial()
        pi0 = np.clip(np.asarray(pi0, dtype=np.float64), PROB_FLOOR, 1 - PROB_FLOOR)
        pi1 = np.clip(np.asarray(pi1, dtype=np.float64), PROB_FLOOR, 1 - PROB_FLOOR)
        if pi0.shape != pi1.shape:
            raise errors.MisalignedPair("pi0 and pi1 are not aligned")
        mu0, mu1 = float(pi0.mean()), float(pi1.mean())
        if min(mu0, mu1) < MIN_TRUTH_MEAN:
            raise errors.DegenerateTruth(f"truth means too close to 0 (mu0={mu0!r}, mu1={mu1!r})")
        warm, cool = comparison.orient(mu0, mu1)
        rr = warm / cool
        for a in (pi0, pi1):
            a.setflags(write=False)
        return cls(label, pi0, pi1, mu0, mu1, rr, 1.0 - 1.0 / rr, warm - cool, comparison)


def build_truth(preds_factual: PredictionSet, preds_cf: PredictionSet, label=None,
                comparison: ComparisonSpec | None = None) -> TruthScenario:
    """Truth scenario whose event probabilities are a model's predictions."""
    if not np.array_equal(preds_factual.day_id, preds_cf.day_id):
        raise errors.MisalignedPair("factual and counterfactual predictions cover different days")
    return TruthScenario.from_arrays(label or preds_factual.model_label, preds_factual.probs,
                                     preds_cf.probs, comparison)


@dataclass(frozen=True)
class SimResultRow:
    truth_label: str
    model_label: str
    replicate: int
    auc: float
    brier: float
    brier_skill: float
    mce: float
    oos_auc: float
    oos_brier: float
    oos_brier_skill: float
    oos_mce: float
    factual_mean: float
    true_cf_mean: float
    est_cf_mean: float
    abs_log_rr_error: float
    ppi_cf_mean: float
    ppi_abs_log_rr_error: float

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return [getattr(self, f) for f in self.header()]

    @classmethod
    def from_strings(cls, d):
        out = {}
        for f in fields(cls):
            v = d[f.name]
            if f.name in ("truth_label", "model_label"):
                out[f.name] = v
            elif f.name == "replicate":
                out[f.name] = int(v)
            else:
                out[f.name] = float(v)
        return cls(**out)


def _maybe_log_error(true_mean, est_mean):
    try:
        return log_rr_error(true_mean, est_mean)
    except errors.NonPositiveMean:
        return float("nan")


def replicate_outcomes(truth: TruthScenario, r: int, master_seed: int):
    """(factual outcomes ~ Bernoulli(pi0), counterfactual outcomes ~ Bernoulli(pi1))."""
    y0 = sample_outcomes(truth.pi0, derive_seed(master_seed, "simlab", truth.label, r, "factual"))
    y1 = sample_outcomes(truth.pi1, derive_seed(master_seed, "simlab", truth.label, r, "counterfactual"))
    return y0, y1


def run_replicate(truth: TruthScenario, X_factual: ScenarioDataset, X_cf: ScenarioDataset,
                  zoo_spec, folds, r: int, master_seed: int) -> list[SimResultRow]:
    """One replicate: redraw outcomes, cross-fit each spec, score it.

    In-sample metrics are cross-validated on the replicate's factual data
    (held-out blocks); ``oos_*`` metrics score the counterfactual predictions
    against outcomes drawn from ``pi1``.
    """
    specs = [zoo_spec] if isinstance(zoo_spec, ModelSpec) else list(zoo_spec)
    X_cf = check_pairing(X_factual, X_cf)
    if len(truth.pi0) != len(X_factual):
        raise errors.MisalignedPair("truth probabilities are not aligned with the predictors")
    y0, y1 = replicate_outcomes(truth, r, master_seed)
    n_pos = int(y0.sum())
    if n_pos == 0 or n_pos == len(y0):
        raise errors.SingleClassReplicate(
            f"replicate {r} of truth {truth.label} drew {n_pos} positives out of {len(y0)}")
    data = X_factual.with_outcome(y0)
    rows = []
    for spec in specs:
        seeded = spec.with_seed(derive_seed(master_seed, "simlab", truth.label, spec.describe(), r))
        factual, (cf,) = cross_fit(seeded, data, folds, [X_cf])
        ins = metrics_report(factual.probs, y0)
        oos = metrics_report(cf.probs, y1)
        est = cf.mean()
        ppi = est + (float(y0.mean()) - factual.mean())
        rows.append(SimResultRow(
            truth.label, spec.describe(), int(r),
            ins.auc, ins.brier, ins.brier_skill, ins.mean_calibration_error,
            oos.auc, oos.brier, oos.brier_skill, oos.mean_calibration_error,
            float(y0.mean()), truth.mu1, est, _maybe_log_error(truth.mu1, est),
            ppi, _maybe_log_error(truth.mu1, ppi),
        ))
    return rows


# -- driver with an append-only, resumable CSV --------------------------------

def _row_line(row: SimResultRow) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerow([format_value(v) for v in row.values()])
    return buf.getvalue()


def read_results(path) -> list[SimResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [SimResultRow.from_strings(d) for d in csv.DictReader(fh)]


def _replicate_unit(unit, truths, X_factual, X_cf, specs, folds, master_seed):
    t, r = unit
    try:
        return run_replicate(truths[t], X_factual, X_cf, specs, folds, r, master_seed)
    except errors.SingleClassReplicate:
        return None


def run_simulation(truths, X_factual, X_cf, specs, folds, R, master_seed, *, workers=1,
                   out_csv=None, progress=None):
    """All truth x replicate units in a fixed order.

    With ``out_csv`` the rows are appended as each unit finishes; units
    already present in the file are skipped, so an interrupted run resumes.
    Returns ``(rows, skipped)`` where ``skipped`` lists degenerate
    ``(truth_label, r)`` pairs (never back-filled).
    """
    done = set()
    existing = []
    if out_csv is not None and os.path.exists(out_csv) and os.path.getsize(out_csv) > 0:
        existing = read_results(out_csv)
        done = {(row.truth_label, row.replicate) for row in existing}
    elif out_csv is not None:
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\r\n").writerow(SimResultRow.header())
    units = [(t, r) for t in range(len(truths)) for r in range(R)
             if (truths[t].label, r) not in done]
    work = partial(_replicate_unit, truths=truths, X_factual=X_factual, X_cf=X_cf,
                   specs=list(specs), folds=folds, master_seed=master_seed)
    rows, skipped = list(existing), []
    batch = max(1, workers or 1) * 2
    for start in range(0, len(units), batch):
        chunk = units[start:start + batch]
        for (t, r), result in zip(chunk, pmap(work, chunk, workers)):
            if result is None:
                skipped.append((truths[t].label, r))
                continue
            rows.extend(result)
            if out_csv is not None:
                with open(out_csv, "a", newline="", encoding="utf-8") as fh:
                    fh.write("".join(_row_line(row) for row in result))
        if progress is not None:
            progress(min(start + batch, len(units)), len(units))
    key = {(t.label, r): i for i, t in enumerate(truths) for r in range(R)}
    rows.sort(key=lambda row: (key.get((row.truth_label, row.replicate), -1),))
    return rows, skipped


# -- analysis ----------------------------------------------------------------

METRIC_COLUMNS = {
    "auc": True, "brier": False, "brier_skill": True, "mce": False,
    "oos_auc": True, "oos_brier": False, "oos_brier_skill": True, "oos_mce": False,
    "abs_log_rr_error": False, "ppi_abs_log_rr_error": False,
}
_ALIASES = {"mean_calibration_error": "mce", "oos_mean_calibration_error": "oos_mce"}


def _column(metric_id):
    col = _ALIASES.get(metric_id, metric_id)
    if col not in METRIC_COLUMNS:
        raise ValueError(f"unknown metric column {metric_id!r}; choose from {sorted(METRIC_COLUMNS)}")
    return col


@dataclass(frozen=True)
class CorrelationReport:
    metric: str
    r: float
    p_value: float
    n: int
    method: str = "t"

    def to_dict(self):
        return asdict(self)


def pearson(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise errors.ZeroVariance("a column is constant; correlation is undefined")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    return max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))


def correlate(rows, metric_id, target="abs_log_rr_error", permutations=0, seed=0) -> CorrelationReport:
    """Pearson r between a metric column and the log-RR error across rows.

    The two-sided p-value uses the t transform with n - 2 degrees of
    freedom; ``permutations > 0`` switches to a permutation p-value.
    """
    col, tgt = _column(metric_id), _column(target)
    x = np.array([getattr(row, col) for row in rows], dtype=np.float64)
    y = np.array([getattr(row, tgt) for row in rows], dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = int(x.size)
    if n < 10:
        raise ValueError(f"correlate needs at least 10 usable rows, got {n}")
    r = pearson(x, y)
    if permutations:
        rng = derive_rng(seed, "permutation", col)
        hits = sum(abs(pearson(x, rng.permutation(y))) >= abs(r) - 1e-15 for _ in range(permutations))
        return CorrelationReport(metric_id, r, (hits + 1) / (permutations + 1), n, "permutation")
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return CorrelationReport(metric_id, r, p, n)


@dataclass(frozen=True)
class RegretReport:
    metric: str
    mean_error: float
    sd_error: float
    oracle_mean_error: float
    n_samples: int
    sample_size: int
    n_groups: int

    def to_dict(self):
        return asdict(self)


def regret(rows, metric_id, n_samples=1000, sample_size=50, seed=0, higher_is_better=None,
           target="abs_log_rr_error") -> RegretReport:
    """Mean error of the model picked by ``metric_id``.

    Rows are grouped by (truth, replicate); each group is one comparison in
    which every model saw the same outcomes. Each of ``n_samples`` draws
    takes ``sample_size`` groups without replacement (all groups when there
    are fewer), picks the best model by the metric within each group, and
    averages the picked models' errors.
    """
    col, tgt = _column(metric_id), _column(target)
    higher = METRIC_COLUMNS[col] if higher_is_better is None else higher_is_better
    groups = {}
    for row in rows:
        groups.setdefault((row.truth_label, row.replicate), []).append(row)
    if not groups:
        raise errors.InsufficientModels("no rows to compare")
    models = {row.model_label for row in rows}
    if len(models) > 1:
        groups = {k: g for k, g in groups.items() if len(g) >= 2}
        if not groups:
            raise errors.InsufficientModels("no replicate group has at least two models")
    keys = sorted(groups)
    picked = np.empty(len(keys))
    best = np.empty(len(keys))
    for i, k in enumerate(keys):
        g = sorted(groups[k], key=lambda row: row.model_label)
        vals = np.array([getattr(row, col) for row in g], dtype=np.float64)
        errs = np.array([getattr(row, tgt) for row in g], dtype=np.float64)
        vals = np.where(np.isnan(vals), -np.inf if higher else np.inf, vals)
        j = int(np.argmax(vals) if higher else np.argmin(vals))
        picked[i] = errs[j]
        best[i] = np.nanmin(errs)
    m = min(sample_size, len(keys))
    rng = derive_rng(seed, "regret", col)
    if m == len(keys) or len(models) == 1:
        # Nothing to choose between (or every group drawn): the mean is exact.
        m = len(keys)
        means = np.full(n_samples, picked.mean())
    else:
        means = np.array([picked[rng.choice(len(keys), size=m, replace=False)].mean()
                          for _ in range(n_samples)])
    return RegretReport(metric_id, float(means.mean()), float(means.std()), float(best.mean()),
                        int(n_samples), int(m), len(keys))


def rows_csv_bytes(rows) -> bytes:
    head = io.StringIO()
    csv.writer(head, lineterminator="\r\n").writerow(SimResultRow.header())
    return (head.getvalue() + "".join(_row_line(r) for r in rows)).encode("utf-8")
