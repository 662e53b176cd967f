"""Distribution-shift diagnostics between a factual and a counterfactual scenario.

A propensity model learns to tell factual days (label 1) from their
counterfactual twins. Its held-out accuracy gives the proxy-A distance, its
odds give importance weights, and a PCA of the factual predictors shows
where each scenario's mean sits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import errors
from .data import NUMERIC_COLUMNS, FoldPlan, ScenarioDataset, check_pairing
from .io import csv_bytes, json_bytes
from .metrics import mean_calibration_error, metrics_report, weighted_metrics
from .models.zoo import ModelSpec, fit_arrays
from .parallel import pmap

CLIP_LO, CLIP_HI = 0.01, 0.99
MAX_CLIPPED_FRACTION = 0.5
MIN_PER_BIN = 30


def default_propensity_spec(seed=0) -> ModelSpec:
    return ModelSpec("GradientBoostHistLeafwise", {}, seed)


def _propensity_fold(b, X, labels, blocks, spec):
    train = blocks != b
    model = fit_arrays(spec, X[train], labels[train])
    test = np.flatnonzero(~train)
    return test, model.predict_array(X[test])


def fit_propensity(factual: ScenarioDataset, cf: ScenarioDataset, folds: FoldPlan,
                   spec: ModelSpec | None = None, workers=1):
    """Held-out P(factual | x) for every factual and counterfactual day.

    Both copies of a day fall in the same temporal block, so a day's two
    scores always come from a model that saw neither of them.
    """
    spec = spec or default_propensity_spec()
    cf = check_pairing(factual, cf)
    n = len(factual)
    X = np.vstack([factual.features, cf.features])
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    blk = folds.block_index(factual)
    blocks = np.concatenate([blk, blk])
    parts = pmap(partial(_propensity_fold, X=X, labels=labels, blocks=blocks, spec=spec),
                 range(len(folds)), workers)
    scores = np.empty(2 * n)
    for idx, p in parts:
        scores[idx] = p
    return scores[:n], scores[n:]


def classifier_accuracy(scores, labels, threshold=0.5) -> float:
    """Fraction labeled correctly at ``threshold``; a score exactly on the
    threshold counts as half right, which keeps the statistic symmetric
    under swapping labels and complementing scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels are not aligned")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == y.size:
        raise errors.SingleClass("proxy-A distance needs both source labels")
    correct = np.where(s == threshold, 0.5, ((s > threshold) == (y == 1)).astype(np.float64))
    return float(correct.mean())


def proxy_a_distance(scores, labels, threshold=0.5) -> float:
    """2 - 4 * error, reported raw (negative when accuracy is below 0.5)."""
    err = 1.0 - classifier_accuracy(scores, labels, threshold)
    return 2.0 - 4.0 * err


def importance_weights(scores_factual, clip=(CLIP_LO, CLIP_HI)) -> np.ndarray:
    """(1 - e) / e on clipped scores, normalized to mean 1.

    Reweights factual days toward the counterfactual population.
    """
    e = np.asarray(scores_factual, dtype=np.float64)
    lo, hi = clip
    at_bounds = (e <= lo) | (e >= hi)
    if at_bounds.mean() > MAX_CLIPPED_FRACTION:
        raise errors.AllClipped(
            f"{int(at_bounds.sum())} of {e.size} scores lie at the clip bounds [{lo}, {hi}]")
    e = np.clip(e, lo, hi)
    w = (1.0 - e) / e
    return w / w.mean()


@dataclass(frozen=True)
class SubgroupBin:
    label: str
    temp_lo: float
    temp_hi: float
    n: int
    mean_calibration_error: float


def temperature_subgroups(dataset: ScenarioDataset, preds, k=8, min_per_bin=MIN_PER_BIN):
    """Equal-count temperature bins (coolest first) with per-bin MCE."""
    if dataset.outcome is None:
        raise errors.MissingColumn(f"{dataset.scenario_id} has no outcome column")
    probs = preds.probs if hasattr(preds, "probs") else np.asarray(preds, dtype=np.float64)
    if len(probs) != len(dataset):
        raise errors.MisalignedPair("predictions are not aligned with the dataset")
    if hasattr(preds, "day_id") and not np.array_equal(preds.day_id, dataset.day_id):
        raise errors.MisalignedPair("prediction day_ids differ from the dataset's")
    temp = dataset.numeric["temperature"]
    order = np.argsort(temp, kind="stable")
    bins = []
    for i, idx in enumerate(np.array_split(order, k)):
        if idx.size < min_per_bin:
            raise errors.TooFewPerBin(f"bin {i + 1} of {k} has {idx.size} days (< {min_per_bin})")
        bins.append(SubgroupBin(f"q{i + 1}", float(temp[idx].min()), float(temp[idx].max()),
                                int(idx.size),
                                mean_calibration_error(probs[idx], dataset.outcome[idx])))
    return bins


@dataclass(frozen=True, eq=False)
class PCASummary:
    features: tuple
    eigenvalues: np.ndarray
    loadings: np.ndarray  # (p, 2): columns are the top-2 eigenvectors
    projections: dict     # scenario id -> (pc1, pc2) of its mean
    arrows: dict          # counterfactual id -> cf mean minus factual mean

    def to_dict(self):
        return {"features": list(self.features), "eigenvalues": self.eigenvalues.tolist(),
                "loadings": {f: self.loadings[j].tolist() for j, f in enumerate(self.features)},
                "projections": {k: list(v) for k, v in self.projections.items()},
                "arrows": {k: list(v) for k, v in self.arrows.items()}}


def pca_shift_summary(factual: ScenarioDataset, cf_list, columns=NUMERIC_COLUMNS) -> PCASummary:
    """PCA of the factual correlation matrix with scenario means projected."""
    Xf = np.column_stack([factual.numeric[c] for c in columns])
    center = Xf.mean(axis=0)
    scale = Xf.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (Xf - center) / scale
    corr = Z.T @ Z / len(Z)
    vals, vecs = np.linalg.eigh(corr)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if np.sum(vals > 1e-10 * max(vals[0], 1e-300)) < 2:
        raise errors.RankDeficient("fewer than 2 nonzero eigenvalues in the factual predictors")
    # Fix signs so the largest-magnitude loading of each component is positive.
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    top = vecs[:, :2]

    def project(ds):
        X = np.column_stack([ds.numeric[c] for c in columns])
        return ((X.mean(axis=0) - center) / scale) @ top

    base = project(factual)
    projections = {factual.scenario_id: tuple(float(v) for v in base)}
    arrows = {}
    for cf in cf_list:
        pc = project(cf)
        projections[cf.scenario_id] = tuple(float(v) for v in pc)
        arrows[cf.scenario_id] = tuple(float(v) for v in pc - base)
    return PCASummary(tuple(columns), vals, top, projections, arrows)


@dataclass(frozen=True, eq=False)
class ShiftReport:
    factual_id: str
    cf_id: str
    propensity_factual: np.ndarray
    propensity_cf: np.ndarray
    accuracy: float
    proxy_a: float
    subgroup_curve: list = field(default_factory=list)
    pca_summary: PCASummary | None = None
    weighted_metrics: dict | None = None
    unweighted_metrics: dict | None = None
    clip_bounds: tuple = (CLIP_LO, CLIP_HI)
    propensity_model: str = ""

    def to_dict(self):
        return {
            "factual": self.factual_id, "counterfactual": self.cf_id,
            "accuracy": self.accuracy, "proxy_a": self.proxy_a,
            "clip_bounds": list(self.clip_bounds), "propensity_model": self.propensity_model,
            "subgroup_curve": [b.__dict__ for b in self.subgroup_curve],
            "pca_summary": None if self.pca_summary is None else self.pca_summary.to_dict(),
            "weighted_metrics": self.weighted_metrics,
            "unweighted_metrics": self.unweighted_metrics,
        }

    def to_json_bytes(self) -> bytes:
        return json_bytes(self.to_dict())

    def subgroup_csv(self) -> bytes:
        return csv_bytes(("bin", "temp_lo", "temp_hi", "n", "mean_calibration_error"),
                         [(b.label, b.temp_lo, b.temp_hi, b.n, b.mean_calibration_error)
                          for b in self.subgroup_curve])

    def pca_csv(self) -> bytes:
        rows = [("scenario", sid, v[0], v[1]) for sid, v in self.pca_summary.projections.items()]
        rows += [("arrow", sid, v[0], v[1]) for sid, v in self.pca_summary.arrows.items()]
        return csv_bytes(("kind", "scenario", "pc1", "pc2"), rows)


def shift_report(factual, cf, folds, spec=None, preds=None, k=8, workers=1) -> ShiftReport:
    """Full diagnostic bundle. ``preds`` (out-of-sample factual predictions)
    enables the temperature subgroup curve and the weighted metrics."""
    spec = spec or default_propensity_spec()
    sf, sc = fit_propensity(factual, cf, folds, spec, workers)
    labels = np.concatenate([np.ones(len(sf)), np.zeros(len(sc))])
    scores = np.concatenate([sf, sc])
    acc = classifier_accuracy(scores, labels)
    curve, wm, um = [], None, None
    if preds is not None:
        curve = temperature_subgroups(factual, preds, k)
        w = importance_weights(sf)
        wm = weighted_metrics(preds.probs, factual.outcome, w).to_dict()
        um = metrics_report(preds.probs, factual.outcome).to_dict()
    return ShiftReport(factual.scenario_id, cf.scenario_id, sf, sc, acc, 2.0 - 4.0 * (1.0 - acc),
                       curve, pca_shift_summary(factual, [cf]), wm, um,
                       propensity_model=spec.describe())
