"""Random forest and the two gradient-boosting variants."""
import math

import numpy as np
from scipy.special import expit

from .trees import (GINI, NEWTON, Binner, TreeEnsemble, exact_split_finder, grow_leafwise,
                    grow_levelwise, hist_split_finder)

MIN_GAIN = 1e-12


def fit_random_forest(X, y, hp, rng):
    """Bagged Gini trees with per-node feature subsampling on binned features."""
    n, p = X.shape
    mtry = hp["mtry"] or math.ceil(math.sqrt(p))
    binner = Binner(hp["max_bins"]).fit(X)
    binned = binner.transform(X)
    yf = y.astype(np.float64)
    trees = []
    for _ in range(hp["n_trees"]):
        if hp["bootstrap"]:
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        g = w * yf
        finder = hist_split_finder(binned, binner.thresholds, binner.n_bins, g, w,
                                   criterion=GINI, l2=0.0, min_child_weight=0.0,
                                   min_samples_leaf=hp["min_samples_leaf"], mtry=mtry, rng=rng)
        arrays, _ = grow_levelwise(X, g, w, finder, max_depth=hp["max_depth"], criterion=GINI,
                                   l2=0.0, min_gain=MIN_GAIN, active=w > 0)
        trees.append(arrays)
    return {"ensemble": TreeEnsemble.from_trees(trees)}


def predict_random_forest(params, X):
    ens = params["ensemble"]
    return ens.predict_sum(X) / ens.n_trees


def _base_score(y):
    ybar = float(np.mean(y))
    return math.log(ybar / (1.0 - ybar))


def fit_gbm_levelwise(X, y, hp, rng):
    """Depth-limited Newton boosting with exact split search."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    yf = y.astype(np.float64)
    base = _base_score(yf)
    F = np.full(len(yf), base)
    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    trees = []
    for _ in range(hp["n_trees"]):
        prob = expit(F)
        g = prob - yf
        h = prob * (1.0 - prob)
        finder = exact_split_finder(X, sorted_idx, g, h, criterion=NEWTON, l2=hp["l2"],
                                    min_child_weight=hp["min_child_weight"],
                                    min_samples_leaf=hp["min_samples_leaf"])
        arrays, leaf_of = grow_levelwise(X, g, h, finder, max_depth=hp["max_depth"],
                                         criterion=NEWTON, l2=hp["l2"], min_gain=MIN_GAIN,
                                         leaf_scale=hp["learning_rate"])
        F += arrays[4][leaf_of]
        trees.append(arrays)
    return {"base_score": base, "ensemble": TreeEnsemble.from_trees(trees)}


def fit_gbm_leafwise(X, y, hp, rng):
    """Best-first Newton boosting on 64-bin feature histograms."""
    yf = y.astype(np.float64)
    binner = Binner(hp["max_bins"]).fit(X)
    binned = binner.transform(X)
    base = _base_score(yf)
    F = np.full(len(yf), base)
    trees = []
    for _ in range(hp["n_trees"]):
        prob = expit(F)
        g = prob - yf
        h = prob * (1.0 - prob)
        arrays, leaf_of = grow_leafwise(binned, binner.thresholds, binner.n_bins, g, h,
                                        max_leaves=hp["max_leaves"], max_depth=hp["max_depth"],
                                        l2=hp["l2"], min_child_weight=hp["min_child_weight"],
                                        min_samples_leaf=hp["min_samples_leaf"],
                                        min_gain=MIN_GAIN, leaf_scale=hp["learning_rate"])
        F += arrays[4][leaf_of]
        trees.append(arrays)
    return {"base_score": base, "ensemble": TreeEnsemble.from_trees(trees)}


def predict_gbm(params, X):
    return expit(params["base_score"] + params["ensemble"].predict_sum(X))
