import math

import numpy as np
import pytest

from eeaval import _kernels, errors
from eeaval.data import FEATURE_NAMES, GeneratorConfig, generate_synthetic, plan_temporal_folds
from eeaval.metrics import auc, log_loss
from eeaval.models import (ALGORITHMS, ModelSpec, cross_fit, default_grid, dumps_model, fit,
                           fit_arrays, load_model, loads_model, predict_proba, save_model,
                           tune_cv, zoo_specs)
from eeaval.models.linear import fit_elastic_net, loss_gradient, penalized_loss

SMALL = {
    "LogisticRegression": {},
    "ElasticNetLogistic": {"lam": 1e-3},
    "RandomForest": {"n_trees": 10, "max_depth": 6},
    "GradientBoostLevelwise": {"n_trees": 15, "max_depth": 3},
    "GradientBoostHistLeafwise": {"n_trees": 15, "max_leaves": 7},
}


def _toy(rng, n=400):
    X = rng.normal(size=(n, len(FEATURE_NAMES)))
    logit = -1.0 + 1.2 * X[:, 0] - 0.8 * X[:, 3] + 0.5 * X[:, 5] ** 2
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(float)
    return X, y


@pytest.mark.parametrize("algo", list(ALGORITHMS))
def test_fit_beats_constant_predictor(algo, rng):
    X, y = _toy(rng)
    m = fit_arrays(ModelSpec(algo, SMALL[algo], 1), X, y)
    p = m.predict_array(X)
    assert ((p > 0) & (p < 1)).all()
    assert log_loss(p, y) <= log_loss(np.full(len(y), y.mean()), y) + 1e-9


@pytest.mark.parametrize("algo", list(ALGORITHMS))
def test_probabilities_in_range_on_extreme_inputs(algo, rng):
    X, y = _toy(rng)
    m = fit_arrays(ModelSpec(algo, SMALL[algo], 1), X, y)
    wild = rng.normal(scale=1e6, size=(50, X.shape[1]))
    p = m.predict_array(wild)
    assert np.isfinite(p).all() and ((p >= 0) & (p <= 1)).all()


@pytest.mark.parametrize("algo", list(ALGORITHMS))
def test_seeded_determinism(algo, rng):
    X, y = _toy(rng)
    spec = ModelSpec(algo, SMALL[algo], 42)
    a = fit_arrays(spec, X, y).predict_array(X)
    b = fit_arrays(spec, X, y).predict_array(X)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("algo", list(ALGORITHMS))
def test_persistence_round_trip(algo, rng, tmp_path):
    X, y = _toy(rng)
    m = fit_arrays(ModelSpec(algo, SMALL[algo], 5), X, y)
    again = loads_model(dumps_model(m))
    assert np.array_equal(again.predict_array(X), m.predict_array(X))
    path = tmp_path / "m.json"
    save_model(m, path)
    assert np.array_equal(load_model(path).predict_array(X), m.predict_array(X))
    assert again.spec == m.spec


def test_persistence_rejects_unknown_version(rng):
    X, y = _toy(rng)
    text = dumps_model(fit_arrays(ModelSpec("LogisticRegression"), X, y))
    with pytest.raises(Exception):
        loads_model(text.replace('"format_version": 1', '"format_version": 99'))


@pytest.mark.parametrize("algo", ["RandomForest", "GradientBoostLevelwise", "GradientBoostHistLeafwise"])
def test_trees_invariant_to_monotone_transform(algo, rng):
    X, y = _toy(rng)
    j = FEATURE_NAMES.index("slope")
    X2 = X.copy()
    X2[:, j] = X[:, j] ** 3
    spec = ModelSpec(algo, SMALL[algo], 3)
    a = fit_arrays(spec, X, y).predict_array(X)
    b = fit_arrays(spec, X2, y).predict_array(X2)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_separable_logistic_has_perfect_auc(rng):
    X = np.zeros((100, len(FEATURE_NAMES)))
    X[:, :2] = rng.normal(size=(100, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    m = fit_arrays(ModelSpec("LogisticRegression", {"l2": 1e-6}), X, y)
    assert auc(m.predict_array(X), y) == 1.0


def test_elastic_net_complete_shrinkage(rng):
    X, y = _toy(rng)
    m = fit_arrays(ModelSpec("ElasticNetLogistic", {"lam": 1e6}), X, y)
    assert np.all(m.parameters["coef"] == 0)
    assert np.max(np.abs(m.predict_array(X) - y.mean())) <= 1e-6


def test_elastic_net_path_is_smooth(rng):
    X, y = _toy(rng)
    means = [fit_elastic_net(X, y, lam=lam, alpha=0.5) for lam in np.logspace(-4, 0, 13)]
    # Factor-2 spacing is finer than the 10**(1/3) grid; compare mean predictions.
    from eeaval.models.linear import predict_linear
    m = [predict_linear(p, X).mean() for p in means]
    assert np.max(np.abs(np.diff(m))) < 0.2


def test_forest_stump_is_training_prevalence(rng):
    X, y = _toy(rng)
    spec = ModelSpec("RandomForest", {"n_trees": 1, "max_depth": 0, "bootstrap": False})
    p = fit_arrays(spec, X, y).predict_array(X)
    assert np.allclose(p, y.mean(), atol=1e-15)


@pytest.mark.parametrize("algo", ["GradientBoostLevelwise", "GradientBoostHistLeafwise"])
def test_boosting_zero_trees_is_base_rate(algo, rng):
    X, y = _toy(rng)
    p = fit_arrays(ModelSpec(algo, {"n_trees": 0}), X, y).predict_array(X)
    assert np.allclose(p, y.mean(), atol=1e-12)


def test_identical_rows_identical_probs(rng):
    X, y = _toy(rng)
    m = fit_arrays(ModelSpec("GradientBoostHistLeafwise", SMALL["GradientBoostHistLeafwise"]), X, y)
    p = m.predict_array(np.repeat(X[:1], 5, axis=0))
    assert np.all(p == p[0])


def test_errors(rng):
    X, y = _toy(rng)
    with pytest.raises(errors.SingleClassTraining):
        fit_arrays(ModelSpec("LogisticRegression"), X, np.zeros(len(y)))
    with pytest.raises(errors.UnknownHyperparameter):
        ModelSpec("RandomForest", {"learning_rate": 0.1})
    with pytest.raises(ValueError):
        ModelSpec("NeuralNet")
    m = fit_arrays(ModelSpec("LogisticRegression"), X, y)
    with pytest.raises(errors.SchemaMismatch):
        m.predict_array(X, feature_names=FEATURE_NAMES[::-1])
    with pytest.raises(errors.SchemaMismatch):
        m.predict_array(X[:, :3])


def test_spec_serialization():
    s = ModelSpec("GradientBoostLevelwise", {"n_trees": 5, "learning_rate": 0.2}, 9)
    assert ModelSpec.from_dict(s.to_dict()) == s
    assert s.describe() == "GradientBoostLevelwise(learning_rate=0.2,n_trees=5)"
    assert s.with_seed(3).seed == 3


def test_default_grids():
    assert len(default_grid("ElasticNetLogistic")) == 24
    assert len(default_grid("GradientBoostLevelwise")) == 8
    assert len(default_grid("GradientBoostHistLeafwise")) == 8
    assert default_grid("RandomForest")[0].hyperparameters["mtry"] == math.ceil(math.sqrt(len(FEATURE_NAMES)))
    assert len(zoo_specs("desk")) == 5


@pytest.fixture(scope="module")
def linear_world():
    cfg = GeneratorConfig(n_days=3000, temperature_quadratic=0.0, temperature_shift=-1.0,
                          base_rate=0.15)
    return generate_synthetic(cfg, 2)


def test_correctly_specified_logistic_is_consistent():
    cfg = GeneratorConfig(n_days=50000, temperature_quadratic=0.0)
    obs, _, truth = generate_synthetic(cfg, 0)
    p = predict_proba(fit(ModelSpec("LogisticRegression"), obs), obs).probs
    assert np.mean(np.abs(p - truth.pi0)) <= 0.02


def test_tune_cv(linear_world):
    obs = linear_world[0]
    folds = plan_temporal_folds(obs, 6)
    strong, weak = ModelSpec("ElasticNetLogistic", {"lam": 1e6}), ModelSpec("ElasticNetLogistic", {"lam": 0.01})
    assert tune_cv([strong, weak], obs, folds, "auc") == weak
    assert tune_cv([weak], obs, folds, "auc") == weak
    a, b = ModelSpec("LogisticRegression", {}, 1), ModelSpec("LogisticRegression", {}, 2)
    assert tune_cv([a, b], obs, folds, "mean_calibration_error") is a
    with pytest.raises(errors.EmptyGrid):
        tune_cv([], obs, folds, "auc")


def test_cross_fit_blocks_and_counterfactual(linear_world):
    obs, cf, _ = linear_world
    folds = plan_temporal_folds(obs, 3)
    spec = ModelSpec("LogisticRegression")
    factual, (cfp,), model = cross_fit(spec, obs, folds, [cf], return_model=True)
    assert factual.out_of_sample and len(folds) == 6
    assert set(factual.fold_of_day) == set(folds.labels)
    assert np.array_equal(factual.fold_of_day, folds.labels_for(obs))
    np.testing.assert_array_equal(cfp.probs, model.predict_array(cf.features))
    # Each block is predicted by a model that never saw it.
    b0 = folds.block_index(obs) == 0
    held = fit(spec, obs.take(np.flatnonzero(~b0))).predict_array(obs.features[b0])
    np.testing.assert_array_equal(factual.probs[b0], held)


def test_cross_fit_self_target_equals_in_sample(linear_world):
    obs = linear_world[0]
    folds = plan_temporal_folds(obs, 6)
    _, (same,) = cross_fit(ModelSpec("LogisticRegression"), obs, folds, [obs])
    full = predict_proba(fit(ModelSpec("LogisticRegression"), obs), obs)
    np.testing.assert_array_equal(same.probs, full.probs)


def test_cross_fit_iid_halves():
    cfg = GeneratorConfig(n_days=6000, start_year=2003, end_year=2004, temperature_quadratic=0.0,
                          base_rate=0.2)
    obs = generate_synthetic(cfg, 5)[0]
    folds = plan_temporal_folds(obs, 1)
    factual, _ = cross_fit(ModelSpec("LogisticRegression"), obs, folds)
    ins = auc(fit(ModelSpec("LogisticRegression"), obs).predict_array(obs.features), obs.outcome)
    assert abs(auc(factual.probs, obs.outcome) - ins) <= 0.05


def test_cross_fit_workers_invariant(linear_world):
    obs, cf, _ = linear_world
    folds = plan_temporal_folds(obs, 6)
    spec = ModelSpec("RandomForest", {"n_trees": 5, "max_depth": 4}, 8)
    a, (ac,) = cross_fit(spec, obs, folds, [cf], workers=1)
    b, (bc,) = cross_fit(spec, obs, folds, [cf], workers=2)
    assert np.array_equal(a.probs, b.probs) and np.array_equal(ac.probs, bc.probs)


def test_nested_tuning_runs(linear_world):
    obs, cf, _ = linear_world
    folds = plan_temporal_folds(obs, 6)
    grid = [ModelSpec("ElasticNetLogistic", {"lam": l}) for l in (1e6, 1e-3)]
    factual, (cfp,) = cross_fit(grid[0], obs, folds, [cf], grid=grid, criterion="auc")
    assert np.std(cfp.probs) > 0


def test_prediction_set_csv(linear_world):
    obs = linear_world[0]
    ps = predict_proba(fit(ModelSpec("LogisticRegression"), obs), obs)
    lines = ps.to_csv_bytes().decode().split("\r\n")
    assert lines[0] == "day_id,model,scenario,prob,fold,out_of_sample"
    assert len(lines) == len(obs) + 2


# -- analytic gradients -----------------------------------------------------

def test_logistic_gradient_matches_finite_differences(rng):
    for _ in range(20):
        n, p = int(rng.integers(5, 30)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, p))
        y = rng.integers(0, 2, n).astype(float)
        b0, beta, l2 = rng.normal(), rng.normal(size=p), float(rng.random())
        g0, gb = loss_gradient(b0, beta, X, y, l2)
        h = 1e-6
        fd0 = (penalized_loss(b0 + h, beta, X, y, l2) - penalized_loss(b0 - h, beta, X, y, l2)) / (2 * h)
        assert abs(fd0 - g0) <= 1e-6 * max(1.0, abs(g0))
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            fd = (penalized_loss(b0, beta + e, X, y, l2) - penalized_loss(b0, beta - e, X, y, l2)) / (2 * h)
            assert abs(fd - gb[j]) <= 1e-6 * max(1.0, abs(gb[j]))


# -- compiled vs fallback kernels ------------------------------------------

@pytest.mark.skipif("compiled" not in _kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("algo", list(ALGORITHMS))
def test_backends_agree(algo, rng):
    X, y = _toy(rng, 600)
    spec = ModelSpec(algo, SMALL[algo], 11)
    prev = _kernels.set_backend("compiled")
    try:
        a = fit_arrays(spec, X, y).predict_array(X)
        _kernels.set_backend("python")
        b = fit_arrays(spec, X, y).predict_array(X)
    finally:
        _kernels.set_backend(prev)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_backend_switch_validation():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")
    assert _kernels.backend_name() in _kernels.available_backends()
