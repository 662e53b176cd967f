import numpy as np
import pytest

from eeaval import errors
from eeaval.data import (CSV_COLUMNS, FEATURE_NAMES, OBSERVED, PAIRED_COLUMNS, PRE_INDUSTRIAL,
                         GeneratorConfig, ScenarioDataset, check_pairing, generate_synthetic,
                         ingest_csv, plan_temporal_folds, sample_outcomes, synthetic_id,
                         validate_scenario_id)

HEADER = ",".join(CSV_COLUMNS)


def _csv(rows, outcome=True):
    head = HEADER + (",outcome" if outcome else "")
    return (head + "\n" + "\n".join(rows) + "\n").encode()


ROWS = [
    "1,2003-06-01,30.1,2.2,8.0,11.0,0.0,3.5,forest,N,10.0,500.0,0.4,0",
    "2,2004-07-15,25.3,1.8,9.5,12.5,1.2,2.0,shrub,E,4.0,900.0,0.6,0",
    "3,2008-08-20,35.0,3.1,6.0,9.0,0.0,6.1,savanna_grassland,W,22.0,300.0,0.5,1",
]


def test_ingest_three_rows():
    ds = ingest_csv(_csv(ROWS), OBSERVED)
    assert len(ds) == 3
    assert ds.outcome.tolist() == [0, 0, 1]
    assert ds.prevalence() == pytest.approx(1 / 3)
    assert ds.features.shape == (3, len(FEATURE_NAMES))
    assert ds.records[2].land_use == "savanna_grassland"


def test_csv_round_trip():
    ds = ingest_csv(_csv(ROWS), OBSERVED)
    again = ingest_csv(ds.to_csv_bytes(), OBSERVED)
    assert again.to_csv_bytes() == ds.to_csv_bytes()
    np.testing.assert_array_equal(again.features, ds.features)


def test_records_round_trip():
    ds = ingest_csv(_csv(ROWS), OBSERVED)
    back = ScenarioDataset.from_records(OBSERVED, ds.records)
    assert back.to_csv_bytes() == ds.to_csv_bytes()


@pytest.mark.parametrize("row, exc", [
    ("4,2005-06-01,30,2,8,11,0,3,desert,N,10,500,0.4,0", errors.BadCategoryLevel),
    ("4,2005-06-01,nan,2,8,11,0,3,forest,N,10,500,0.4,0", errors.NonFiniteValue),
    ("1,2005-06-01,30,2,8,11,0,3,forest,N,10,500,0.4,0", errors.DuplicateDayId),
    ("4,2005-06-01,30,2,8,11,0,3,forest,N,10,500,0.4,2", errors.InvalidValue),
    ("4,2005-06-01,30,2,8,11,-1,3,forest,N,10,500,0.4,0", errors.InvalidValue),
])
def test_ingest_rejects_bad_rows(row, exc):
    with pytest.raises(exc):
        ingest_csv(_csv(ROWS + [row]), OBSERVED)


def test_ingest_header_rules():
    with pytest.raises(errors.MissingColumn):
        ingest_csv(_csv([r.rsplit(",", 1)[0] for r in ROWS], outcome=False), OBSERVED)
    with pytest.raises(errors.UnexpectedColumn):
        ingest_csv(_csv(ROWS), PRE_INDUSTRIAL)
    bad = _csv(ROWS).replace(b"wind,", b"windspeed,")
    with pytest.raises(errors.MissingColumn):
        ingest_csv(bad, OBSERVED)
    with pytest.raises(errors.MissingColumn):
        ingest_csv(b"", OBSERVED)


def test_error_names_offending_row():
    with pytest.raises(errors.BadCategoryLevel, match="row|line"):
        ingest_csv(_csv(ROWS + ["4,2005-06-01,30,2,8,11,0,3,desert,N,10,500,0.4,0"]), OBSERVED)


def test_scenario_ids():
    assert validate_scenario_id(OBSERVED) == OBSERVED
    assert synthetic_id("x").startswith("Synthetic")
    with pytest.raises(ValueError):
        validate_scenario_id("Martian")


def test_pairing_violation_on_wind():
    obs = ingest_csv(_csv(ROWS), OBSERVED)
    cf_rows = [r.rsplit(",", 1)[0] for r in ROWS]
    cf_rows[1] = cf_rows[1].replace(",2.0,shrub", ",2.5,shrub")
    cf = ingest_csv(_csv(cf_rows, outcome=False), PRE_INDUSTRIAL)
    with pytest.raises(errors.PairingViolation, match="wind"):
        check_pairing(obs, cf)


def test_pairing_reorders_by_day_id():
    obs = ingest_csv(_csv(ROWS), OBSERVED)
    cf = ingest_csv(_csv([r.rsplit(",", 1)[0] for r in ROWS[::-1]], outcome=False), PRE_INDUSTRIAL)
    out = check_pairing(obs, cf)
    np.testing.assert_array_equal(out.day_id, obs.day_id)


def test_folds_three_year_blocks(small_world):
    plan = plan_temporal_folds(small_world[0], 3)
    assert plan.labels == ["2003-2005", "2006-2008", "2009-2011", "2012-2014", "2015-2017", "2018-2020"]
    ids = np.concatenate([b.day_ids for b in plan.blocks])
    assert np.array_equal(np.sort(ids), np.sort(small_world[0].day_id))


def test_folds_remainder_and_span():
    ds = generate_synthetic(GeneratorConfig(n_days=300, start_year=2003, end_year=2009), 0)[0]
    assert plan_temporal_folds(ds, 3).labels == ["2003-2005", "2006-2008", "2009-2009"]
    short = generate_synthetic(GeneratorConfig(n_days=300, start_year=2003, end_year=2004), 0)[0]
    with pytest.raises(errors.InsufficientSpan):
        plan_temporal_folds(short, 3)


def test_generator_null_shift():
    obs, cf, truth = generate_synthetic(GeneratorConfig(n_days=2000, temperature_shift=0.0), 1)
    np.testing.assert_array_equal(truth.pi0, truth.pi1)
    np.testing.assert_array_equal(obs.features, cf.features)


def test_generator_warming_raises_risk():
    _, _, truth = generate_synthetic(GeneratorConfig(n_days=2000, temperature_shift=4.0), 1)
    assert truth.pi1.mean() > truth.pi0.mean()


def test_generator_base_rate():
    obs, _, truth = generate_synthetic(GeneratorConfig(n_days=20000, base_rate=0.021), 0)
    assert abs(truth.pi0.mean() - 0.021) <= 0.0042


def test_generator_pairing_and_reproducibility(small_world):
    obs, cf, truth = small_world
    check_pairing(obs, cf)
    for c in PAIRED_COLUMNS:
        assert np.array_equal(obs.numeric[c], cf.numeric[c])
    assert np.array_equal(obs.land_use, cf.land_use)
    again = generate_synthetic(GeneratorConfig(n_days=4000, temperature_shift=-2.0), 3)
    assert again[0].to_csv_bytes() == obs.to_csv_bytes()
    other = generate_synthetic(GeneratorConfig(n_days=4000, temperature_shift=-2.0), 4)
    assert np.array_equal(other[2].pi0, truth.pi0)
    assert not np.array_equal(other[0].outcome, obs.outcome)


def test_generator_degenerate_config():
    with pytest.raises(errors.DegenerateConfig):
        generate_synthetic(GeneratorConfig(n_days=100, temperature_shift=1.0,
                                           coefficients={}, temperature_quadratic=0.0), 0)
    with pytest.raises(errors.DegenerateConfig):
        GeneratorConfig(coefficients={"humidity": 1.0})


def test_sample_outcomes_extremes_and_rate():
    assert sample_outcomes(np.zeros(50), 0).sum() == 0
    assert sample_outcomes(np.ones(50), 0).sum() == 50
    m = sample_outcomes(np.full(10000, 0.5), 7).mean()
    assert 0.485 <= m <= 0.515
    with pytest.raises(errors.ProbabilityOutOfRange):
        sample_outcomes([0.2, 1.1], 0)


def test_sample_outcomes_monte_carlo_consistency():
    p = np.array([0.02, 0.1, 0.5, 0.9])
    draws = np.array([sample_outcomes(p, s) for s in range(1000)])
    sigma = np.sqrt(p * (1 - p) / 1000)
    assert (np.abs(draws.mean(axis=0) - p) <= 3 * sigma).all()


def test_dataset_is_read_only(small_world):
    with pytest.raises(ValueError):
        small_world[0].numeric["temperature"][0] = 0.0
