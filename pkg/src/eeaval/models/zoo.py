"""Model specs, fitting, prediction sets, CV tuning and temporal cross-fitting."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping

import numpy as np

from .. import errors
from .._rng import derive_rng
from ..data import FEATURE_NAMES, FoldPlan, ScenarioDataset, check_pairing
from ..metrics import evaluate, metric_direction
from ..parallel import pmap
from . import ensembles, linear

PROB_FLOOR = 1e-6


@dataclass(frozen=True)
class Algorithm:
    name: str
    defaults: Mapping[str, object]
    fit: Callable
    predict: Callable


def _fit_lr(X, y, hp, rng):
    return linear.fit_logistic(X, y, l2=hp["l2"])


def _fit_en(X, y, hp, rng):
    return linear.fit_elastic_net(X, y, lam=hp["lam"], alpha=hp["alpha"])


ALGORITHMS = {
    a.name: a for a in (
        Algorithm("LogisticRegression", {"l2": 1e-8}, _fit_lr, linear.predict_linear),
        Algorithm("ElasticNetLogistic", {"alpha": 0.5, "lam": 1e-3}, _fit_en, linear.predict_linear),
        Algorithm("RandomForest",
                  {"n_trees": 300, "max_depth": 16, "mtry": None, "min_samples_leaf": 5,
                   "max_bins": 64, "bootstrap": True},
                  ensembles.fit_random_forest, ensembles.predict_random_forest),
        Algorithm("GradientBoostLevelwise",
                  {"n_trees": 100, "learning_rate": 0.1, "max_depth": 3, "l2": 1.0,
                   "min_child_weight": 1.0, "min_samples_leaf": 1},
                  ensembles.fit_gbm_levelwise, ensembles.predict_gbm),
        Algorithm("GradientBoostHistLeafwise",
                  {"n_trees": 100, "learning_rate": 0.1, "max_leaves": 31, "max_depth": -1,
                   "max_bins": 64, "l2": 0.0, "min_child_weight": 1e-3, "min_samples_leaf": 20},
                  ensembles.fit_gbm_leafwise, ensembles.predict_gbm),
    )
}


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    hyperparameters: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(ALGORITHMS)}")
        unknown = set(self.hyperparameters) - set(ALGORITHMS[self.algorithm].defaults)
        if unknown:
            raise errors.UnknownHyperparameter(
                f"{self.algorithm} has no hyperparameter(s) {sorted(unknown)}"
            )
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))

    def resolved(self) -> dict:
        hp = dict(ALGORITHMS[self.algorithm].defaults)
        hp.update(self.hyperparameters)
        return hp

    @property
    def label(self) -> str:
        return self.algorithm

    def describe(self) -> str:
        if not self.hyperparameters:
            return self.algorithm
        kv = ",".join(f"{k}={self.hyperparameters[k]}" for k in sorted(self.hyperparameters))
        return f"{self.algorithm}({kv})"

    def with_seed(self, seed: int) -> "ModelSpec":
        return ModelSpec(self.algorithm, self.hyperparameters, seed)

    def to_dict(self):
        return {"algorithm": self.algorithm, "hyperparameters": dict(self.hyperparameters),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["algorithm"], d.get("hyperparameters", {}), int(d.get("seed", 0)))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ModelSpec
    parameters: dict
    feature_schema: tuple

    def predict_array(self, X, feature_names=FEATURE_NAMES) -> np.ndarray:
        if tuple(feature_names) != self.feature_schema:
            raise errors.SchemaMismatch(
                f"model expects features {list(self.feature_schema)}, got {list(feature_names)}"
            )
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_schema):
            raise errors.SchemaMismatch(
                f"expected a 2-D array with {len(self.feature_schema)} columns, got shape {X.shape}"
            )
        raw = ALGORITHMS[self.spec.algorithm].predict(self.parameters, X)
        return np.clip(raw, PROB_FLOOR, 1.0 - PROB_FLOOR)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    model_label: str
    scenario_id: str
    day_id: np.ndarray
    probs: np.ndarray
    fold_of_day: np.ndarray | None = None
    out_of_sample: bool = False

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != np.shape(self.day_id):
            raise ValueError("probs and day_id are not aligned")
        if not ((p >= 0) & (p <= 1)).all():
            raise errors.ProbabilityOutOfRange("probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)

    def mean(self) -> float:
        return float(np.mean(self.probs))

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["day_id", "model", "scenario", "prob", "fold", "out_of_sample"])
        for i in range(len(self)):
            fold = "" if self.fold_of_day is None else self.fold_of_day[i]
            writer.writerow([int(self.day_id[i]), self.model_label, self.scenario_id,
                             repr(float(self.probs[i])), fold, str(self.out_of_sample).lower()])
        return buf.getvalue().encode("utf-8")


def fit(spec: ModelSpec, train: ScenarioDataset) -> TrainedModel:
    """Fit ``spec`` on a dataset with outcomes by minimizing log loss."""
    if train.outcome is None:
        raise errors.SingleClassTraining(f"{train.scenario_id} has no outcomes to train on")
    return fit_arrays(spec, train.features, train.outcome)


def fit_arrays(spec: ModelSpec, X, y) -> TrainedModel:
    y = np.asarray(y)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == len(y):
        raise errors.SingleClassTraining(
            f"training data has {n_pos} positives out of {len(y)}; need both classes"
        )
    algo = ALGORITHMS[spec.algorithm]
    rng = derive_rng(spec.seed, "fit", spec.algorithm)
    params = algo.fit(np.ascontiguousarray(X, dtype=np.float64), y.astype(np.float64),
                      spec.resolved(), rng)
    return TrainedModel(spec, params, tuple(FEATURE_NAMES))


def predict_proba(model: TrainedModel, X: ScenarioDataset, model_label: str | None = None) -> PredictionSet:
    probs = model.predict_array(X.features, FEATURE_NAMES)
    return PredictionSet(model_label or model.spec.label, X.scenario_id, X.day_id, probs)


# -- default grids -----------------------------------------------------------

def default_grid(algorithm: str, n_features: int = len(FEATURE_NAMES), seed: int = 0) -> list[ModelSpec]:
    """Declared tuning grids (not taken from any reported configuration)."""
    if algorithm == "LogisticRegression":
        combos = [{}]
    elif algorithm == "ElasticNetLogistic":
        lams = np.logspace(-4, -0.5, 8)
        combos = [{"alpha": a, "lam": float(l)} for a in (0.1, 0.5, 0.9) for l in lams]
    elif algorithm == "RandomForest":
        combos = [{"n_trees": 300, "mtry": math.ceil(math.sqrt(n_features))}]
    elif algorithm == "GradientBoostLevelwise":
        combos = [{"learning_rate": lr, "n_trees": t, "max_depth": d}
                  for lr, t, d in itertools.product((0.05, 0.1), (100, 300), (3, 6))]
    elif algorithm == "GradientBoostHistLeafwise":
        combos = [{"learning_rate": lr, "n_trees": t, "max_leaves": lv}
                  for lr, t, lv in itertools.product((0.05, 0.1), (100, 300), (15, 31))]
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return [ModelSpec(algorithm, c, seed) for c in combos]


# -- tuning and cross-fitting ------------------------------------------------

def _score_spec(spec, dataset, folds, criterion):
    blocks = folds.block_index(dataset)
    scores = []
    for b in range(len(folds)):
        test = blocks == b
        train = dataset.take(np.flatnonzero(~test))
        held = dataset.take(np.flatnonzero(test))
        if train.outcome.min() == train.outcome.max():
            continue
        model = fit(spec, train)
        try:
            scores.append(evaluate(criterion, model.predict_array(held.features), held.outcome))
        except (errors.SingleClass, errors.DegenerateReference):
            continue
    return float(np.mean(scores)) if scores else float("nan")


def cv_scores(spec_grid, dataset, folds, criterion, workers=1) -> list[float]:
    """Mean out-of-fold ``criterion`` for each grid member."""
    metric_direction(criterion)
    if len(folds) < 2:
        raise errors.InsufficientSpan("tuning needs at least 2 folds")
    return pmap(partial(_score_spec, dataset=dataset, folds=folds, criterion=criterion),
                spec_grid, workers)


def tune_cv(spec_grid, dataset: ScenarioDataset, folds: FoldPlan, criterion: str,
            workers=1) -> ModelSpec:
    """Grid member with the best mean out-of-fold criterion (first wins ties)."""
    spec_grid = list(spec_grid)
    if not spec_grid:
        raise errors.EmptyGrid("spec grid is empty")
    higher = metric_direction(criterion)
    if len(spec_grid) == 1:
        return spec_grid[0]
    scores = cv_scores(spec_grid, dataset, folds, criterion, workers)
    best_i, best = 0, None
    for i, s in enumerate(scores):
        if math.isnan(s):
            continue
        if best is None or (s > best if higher else s < best):
            best_i, best = i, s
    return spec_grid[best_i]


def _fold_fit(b, spec, dataset, blocks, folds, grid, criterion):
    train_idx = np.flatnonzero(blocks != b)
    test_idx = np.flatnonzero(blocks == b)
    train = dataset.take(train_idx)
    use = spec
    if grid is not None:
        inner = FoldPlan(tuple(blk for i, blk in enumerate(folds.blocks) if i != b), folds.block_years)
        use = tune_cv(grid, train, inner, criterion)
    model = fit(use, train)
    return test_idx, model.predict_array(dataset.features[test_idx])


def cross_fit(spec: ModelSpec, dataset: ScenarioDataset, folds: FoldPlan,
              targets=(), *, grid=None, criterion="log_loss", workers=1, return_model=False):
    """Out-of-sample factual predictions by leave-one-block-out, plus
    counterfactual predictions from one model fit on the full factual data.

    With ``grid`` given, the spec is re-tuned inside every training split
    (nested CV) and once more on the full data.
    """
    blocks = folds.block_index(dataset)
    aligned = [check_pairing(dataset, t) for t in targets]
    parts = pmap(partial(_fold_fit, spec=spec, dataset=dataset, blocks=blocks, folds=folds,
                         grid=grid, criterion=criterion), range(len(folds)), workers)
    probs = np.empty(len(dataset))
    for test_idx, p in parts:
        probs[test_idx] = p
    label = spec.label
    labels = np.array(folds.labels, dtype=object)[blocks]
    factual = PredictionSet(label, dataset.scenario_id, dataset.day_id, probs, labels, True)
    full_spec = tune_cv(grid, dataset, folds, criterion) if grid is not None else spec
    model = fit(full_spec, dataset)
    cfs = [PredictionSet(label, t.scenario_id, t.day_id, model.predict_array(t.features))
           for t in aligned]
    if return_model:
        return factual, cfs, model
    return factual, cfs


# Smaller ensembles for simulation studies that refit every model many times.
DESK_HYPERPARAMETERS = {
    "LogisticRegression": {},
    "ElasticNetLogistic": {"alpha": 0.5, "lam": 1e-3},
    "RandomForest": {"n_trees": 25, "max_depth": 10, "min_samples_leaf": 20},
    "GradientBoostLevelwise": {"n_trees": 40, "learning_rate": 0.15, "max_depth": 3},
    "GradientBoostHistLeafwise": {"n_trees": 50, "learning_rate": 0.1, "max_leaves": 15},
}


def zoo_specs(scale="full", algorithms=None, seed=0) -> list[ModelSpec]:
    """One spec per algorithm, at library defaults (``full``) or ``desk`` size."""
    algorithms = list(algorithms or ALGORITHMS)
    if scale not in ("full", "desk"):
        raise ValueError("scale must be 'full' or 'desk'")
    return [ModelSpec(a, DESK_HYPERPARAMETERS[a] if scale == "desk" else {}, seed)
            for a in algorithms]
