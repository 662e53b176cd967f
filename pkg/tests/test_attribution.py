import json
import math

import numpy as np
import pytest

from eeaval import errors
from eeaval.attribution import (CSV_FIELDS, ComparisonSpec, bootstrap_ci, estimate_attribution,
                                estimates_csv, per_event_rr, ppi_mean)
from eeaval.data import FEATURE_NAMES
from eeaval.models import ModelSpec, PredictionSet, cross_fit, fit

PRE, SSP = ComparisonSpec.preindustrial(), ComparisonSpec.ssp585()


def _ps(p, oos=False, day_id=None):
    p = np.asarray(p, dtype=float)
    ids = np.arange(len(p)) if day_id is None else day_id
    return PredictionSet("m", "PreIndustrial", ids, p, out_of_sample=oos)


def _y(n, pos):
    y = np.zeros(n)
    y[:pos] = 1
    return y


def test_null_effect():
    y = _y(100, 25)
    est = estimate_attribution(y, _ps(np.full(100, 0.25)), PRE)
    assert est.rr == 1.0 and est.far == 0.0 and est.ate == 0.0


def test_preindustrial_table_values():
    # Prevalence 0.02122 with the cooler mean chosen so that RR is 1.40.
    y = _y(100000, 2122)
    est = estimate_attribution(y, _ps(np.full(100000, 0.02122 / 1.40)), PRE)
    assert abs(est.rr - 1.40) < 1e-9
    assert abs(est.far - 0.284) < 2e-3
    assert est.p_warmer == pytest.approx(0.02122)


def test_ssp585_table_values():
    y = _y(100000, 2122)
    est = estimate_attribution(y, _ps(np.full(100000, 0.02674)), SSP)
    assert abs(est.rr - 1.26) < 5e-3
    assert abs(est.far - 0.205) < 2e-3
    assert est.p_warmer == pytest.approx(0.02674) and est.ate > 0


def test_identities_and_orientation(rng):
    y = (rng.random(500) < 0.1).astype(float)
    p = rng.random(500) * 0.2
    for comp in (PRE, SSP):
        e = estimate_attribution(y, _ps(p), comp)
        s = estimate_attribution(y, _ps(p), comp.swapped())
        assert abs(e.far - (1 - 1 / e.rr)) <= 1e-12
        assert abs(e.ate - e.far * e.p_warmer) <= 1e-12
        assert s.rr == pytest.approx(1 / e.rr, rel=1e-15)
        assert s.ate == -e.ate


def test_zero_mean_and_misalignment():
    with pytest.raises(errors.ZeroMean):
        estimate_attribution(np.zeros(10), _ps(np.full(10, 0.1)), PRE)
    with pytest.raises(errors.MisalignedPair):
        estimate_attribution(_y(10, 2), _ps(np.full(9, 0.1)), PRE)


def test_misaligned_day_ids(small_world):
    obs = small_world[0]
    shuffled = _ps(np.full(len(obs), 0.02), day_id=obs.day_id[::-1])
    with pytest.raises(errors.MisalignedPair):
        estimate_attribution(obs, shuffled, PRE)


def test_ppi_rectifier():
    y = _y(100, 10)
    pcf = _ps(np.full(100, 0.07))
    assert ppi_mean(y, _ps(np.full(100, 0.10), oos=True), pcf) == pytest.approx(0.07)
    assert ppi_mean(y, _ps(np.full(100, 0.11), oos=True), pcf) == pytest.approx(0.06)
    with pytest.raises(errors.InSampleLeakage):
        ppi_mean(y, _ps(np.full(100, 0.10)), pcf)


def test_ppi_weighted_uses_weighted_rectifier():
    y = np.array([1.0, 0.0, 0.0, 0.0])
    pf = _ps([0.5, 0.1, 0.1, 0.1], oos=True)
    pcf = _ps([0.2, 0.2, 0.2, 0.2])
    w = np.array([3.0, 1.0, 1.0, 1.0])
    expected = 0.2 + (3 / 6 - (1.5 + 0.3) / 6)
    assert ppi_mean(y, pf, pcf, w) == pytest.approx(expected, abs=1e-15)
    est = estimate_attribution(y, pcf, PRE, estimator="PPIWeighted", preds_factual_oos=pf, weights=w)
    assert est.p_cooler == pytest.approx(expected, abs=1e-15)


def test_estimator_validation():
    y = _y(10, 2)
    with pytest.raises(ValueError):
        estimate_attribution(y, _ps(np.full(10, 0.1)), PRE, estimator="PPI")
    with pytest.raises(ValueError):
        estimate_attribution(y, _ps(np.full(10, 0.1)), PRE, estimator="Median")
    with pytest.raises(ValueError):
        estimate_attribution(y, _ps(np.full(10, 0.1)), PRE, estimator="PPIWeighted",
                             preds_factual_oos=_ps(np.full(10, 0.1), oos=True))


def test_bootstrap_constant_data():
    y = np.ones(50)
    lo, hi, skipped = bootstrap_ci((y, np.full(50, 0.5), None, None), B=200, seed=1)
    assert lo == hi == 2.0 and skipped == 0


def test_bootstrap_determinism_and_workers(rng):
    y = (rng.random(2000) < 0.05).astype(float)
    p = np.clip(rng.normal(0.04, 0.01, 2000), 0.001, 1)
    rows = (y, p, None, None)
    a = bootstrap_ci(rows, B=300, seed=7)
    assert a == bootstrap_ci(rows, B=300, seed=7)
    assert a == bootstrap_ci(rows, B=300, seed=7, workers=2)
    assert a != bootstrap_ci(rows, B=300, seed=8)


def test_bootstrap_stable_in_B(rng):
    y = (rng.random(5000) < 0.05).astype(float)
    p = np.full(5000, 0.04)
    lo1, hi1, _ = bootstrap_ci((y, p, None, None), B=1000, seed=3)
    lo2, hi2, _ = bootstrap_ci((y, p, None, None), B=10000, seed=3)
    assert abs(lo1 - lo2) / lo2 < 0.05 and abs(hi1 - hi2) / hi2 < 0.05


def test_bootstrap_degenerate_and_bounds():
    y = np.zeros(200)
    y[0] = 1
    with pytest.raises(errors.DegenerateResample):
        bootstrap_ci((y, np.full(200, 0.01), None, None), B=200, seed=0)
    with pytest.raises(ValueError):
        bootstrap_ci((y, np.full(200, 0.01), None, None), B=50)


def test_bootstrap_skips_recorded():
    y = _y(100, 3)
    lo, hi, skipped = bootstrap_ci((y, np.full(100, 0.03), None, None), B=1000, seed=0)
    # P(no positive in a resample) = 0.97**100, about 4.8%.
    assert 20 <= skipped <= 80
    assert lo < hi


def test_estimate_carries_interval_and_serializes(rng):
    y = (rng.random(3000) < 0.05).astype(float)
    est = estimate_attribution(y, _ps(np.full(3000, 0.04)), PRE, B=200, seed=4, model_label="LR")
    assert est.ci_lo <= est.rr <= est.ci_hi
    d = json.loads(est.to_json())
    assert d["orientation"] == "WarmerOverCooler" and d["B"] == 200 and d["seed"] == 4
    lines = estimates_csv([est]).decode().split("\r\n")
    assert lines[0] == ",".join(CSV_FIELDS)
    assert lines[1].startswith("preindustrial,LR,MeanPrediction,")


def test_per_event_rr(small_world):
    obs, cf, _ = small_world
    model = fit(ModelSpec("LogisticRegression"), obs)
    x = obs.features[0]
    assert per_event_rr(model, x, x, PRE) == 1.0
    rr = per_event_rr(model, obs, cf, PRE)
    assert rr.shape == (len(obs),)
    # Warmer factual days under a model increasing in temperature.
    t = FEATURE_NAMES.index("temperature")
    if model.parameters["coef"][t] > 0:
        assert np.median(rr) > 1
    with pytest.raises(errors.MisalignedPair):
        per_event_rr(model, obs.features[:3], obs.features[:2], PRE)


def test_cross_fitted_ppi_on_synthetic(small_world, small_folds):
    obs, cf, truth = small_world
    oos, (cfp,) = cross_fit(ModelSpec("LogisticRegression"), obs, small_folds, [cf])
    mp = estimate_attribution(obs, cfp, PRE)
    ppi = estimate_attribution(obs, cfp, PRE, estimator="PPI", preds_factual_oos=oos)
    true_rr = truth.pi0.mean() / truth.pi1.mean()
    assert abs(math.log(mp.rr / true_rr)) < 0.3
    assert abs(math.log(ppi.rr / true_rr)) < 0.3
