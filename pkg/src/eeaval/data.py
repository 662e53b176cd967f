"""Fire-day data model, CSV ingestion, temporal fold plans and synthetic scenarios.

A :class:`ScenarioDataset` is columnar (one numpy array per variable) and
immutable; :class:`FireDayRecord` is the row view used for inspection and
for building small fixtures by hand.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date as _date
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from . import errors
from ._rng import derive_rng

SCHEMA_VERSION = 1

NUMERIC_COLUMNS = (
    "temperature", "vpd", "fm100", "fm1000", "precip", "wind",
    "slope", "elevation", "veg_frac",
)
CSV_COLUMNS = (
    "day_id", "date", "temperature", "vpd", "fm100", "fm1000", "precip", "wind",
    "land_use", "aspect", "slope", "elevation", "veg_frac",
)
LAND_USE_LEVELS = ("forest", "shrub", "savanna_grassland")
ASPECT_LEVELS = ("N", "E", "S", "W")
FEATURE_NAMES = (
    NUMERIC_COLUMNS
    + tuple(f"land_use={lvl}" for lvl in LAND_USE_LEVELS)
    + tuple(f"aspect={lvl}" for lvl in ASPECT_LEVELS)
)
# Held fixed across paired scenarios; only weather driven by temperature moves.
PAIRED_COLUMNS = ("slope", "elevation", "veg_frac", "precip", "wind")

OBSERVED = "Observed"
PRE_INDUSTRIAL = "PreIndustrial"
SSP585_EOC = "SSP585_EOC"
_NAMED_SCENARIOS = (OBSERVED, PRE_INDUSTRIAL, SSP585_EOC)


def validate_scenario_id(scenario_id: str) -> str:
    if scenario_id in _NAMED_SCENARIOS:
        return scenario_id
    if scenario_id.startswith("Synthetic:") and len(scenario_id) > len("Synthetic:"):
        return scenario_id
    raise ValueError(
        f"unknown scenario id {scenario_id!r}; expected one of "
        f"{_NAMED_SCENARIOS} or 'Synthetic:<name>'"
    )


def synthetic_id(name: str) -> str:
    return f"Synthetic:{name}"


@dataclass(frozen=True)
class FireDayRecord:
    day_id: int
    date: _date
    temperature: float
    vapor_pressure_deficit: float
    fuel_moisture_100h: float
    fuel_moisture_1000h: float
    precipitation: float
    wind_speed: float
    land_use: str
    aspect: str
    slope: float
    elevation: float
    vegetation_fraction: float
    outcome: int | None = None


_RECORD_TO_COLUMN = {
    "temperature": "temperature",
    "vapor_pressure_deficit": "vpd",
    "fuel_moisture_100h": "fm100",
    "fuel_moisture_1000h": "fm1000",
    "precipitation": "precip",
    "wind_speed": "wind",
    "slope": "slope",
    "elevation": "elevation",
    "vegetation_fraction": "veg_frac",
}


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScenarioDataset:
    """Fire-day table for one climate scenario.

    ``numeric`` maps each name in :data:`NUMERIC_COLUMNS` to a float array;
    ``land_use`` and ``aspect`` hold integer level codes into
    :data:`LAND_USE_LEVELS` / :data:`ASPECT_LEVELS`.
    """

    scenario_id: str
    day_id: np.ndarray
    date: np.ndarray
    numeric: Mapping[str, np.ndarray]
    land_use: np.ndarray
    aspect: np.ndarray
    outcome: np.ndarray | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        validate_scenario_id(self.scenario_id)
        n = len(self.day_id)
        day_id = _readonly(np.asarray(self.day_id, dtype=np.int64))
        date = _readonly(np.asarray(self.date, dtype="datetime64[D]"))
        numeric = {}
        missing = [c for c in NUMERIC_COLUMNS if c not in self.numeric]
        if missing:
            raise errors.MissingColumn(f"missing numeric column(s): {missing}")
        for name in NUMERIC_COLUMNS:
            col = np.asarray(self.numeric[name], dtype=np.float64)
            if col.shape != (n,):
                raise ValueError(f"column {name!r} has shape {col.shape}, expected ({n},)")
            bad = np.flatnonzero(~np.isfinite(col))
            if bad.size:
                raise errors.NonFiniteValue(
                    f"column {name!r} has non-finite value at row {int(bad[0])}"
                )
            numeric[name] = _readonly(col)
        for name in ("fm100", "fm1000", "precip", "wind"):
            bad = np.flatnonzero(numeric[name] < 0)
            if bad.size:
                raise errors.InvalidValue(f"column {name!r} is negative at row {int(bad[0])}")
        veg = numeric["veg_frac"]
        bad = np.flatnonzero((veg < 0) | (veg > 1))
        if bad.size:
            raise errors.InvalidValue(f"veg_frac outside [0, 1] at row {int(bad[0])}")
        land_use = _readonly(np.asarray(self.land_use, dtype=np.int8))
        aspect = _readonly(np.asarray(self.aspect, dtype=np.int8))
        for name, codes, levels in (("land_use", land_use, LAND_USE_LEVELS),
                                    ("aspect", aspect, ASPECT_LEVELS)):
            bad = np.flatnonzero((codes < 0) | (codes >= len(levels)))
            if bad.size:
                raise errors.BadCategoryLevel(f"{name} code out of range at row {int(bad[0])}")
        if date.shape != (n,) or land_use.shape != (n,) or aspect.shape != (n,):
            raise ValueError("columns have mismatched lengths")
        uniq, counts = np.unique(day_id, return_counts=True)
        if uniq.size != n:
            dup = int(uniq[counts > 1][0])
            raise errors.DuplicateDayId(f"day_id {dup} appears more than once")
        outcome = self.outcome
        if outcome is not None:
            outcome = np.asarray(outcome)
            if outcome.shape != (n,):
                raise ValueError("outcome length does not match records")
            bad = np.flatnonzero((outcome != 0) & (outcome != 1))
            if bad.size:
                raise errors.InvalidValue(f"outcome must be 0/1; row {int(bad[0])}")
            outcome = _readonly(outcome.astype(np.int8))
        elif self.scenario_id == OBSERVED:
            raise errors.MissingColumn("the Observed scenario requires an outcome column")
        object.__setattr__(self, "day_id", day_id)
        object.__setattr__(self, "date", date)
        object.__setattr__(self, "numeric", numeric)
        object.__setattr__(self, "land_use", land_use)
        object.__setattr__(self, "aspect", aspect)
        object.__setattr__(self, "outcome", outcome)

    def __len__(self):
        return len(self.day_id)

    @property
    def has_outcome(self) -> bool:
        return self.outcome is not None

    @property
    def years(self) -> np.ndarray:
        return self.date.astype("datetime64[Y]").astype(np.int64) + 1970

    def prevalence(self) -> float:
        if self.outcome is None:
            raise errors.MissingColumn(f"{self.scenario_id} has no outcomes")
        return float(np.mean(self.outcome))

    @cached_property
    def features(self) -> np.ndarray:
        """Design matrix in :data:`FEATURE_NAMES` order (one-hot, fixed level order)."""
        n = len(self)
        X = np.empty((n, len(FEATURE_NAMES)), dtype=np.float64)
        for j, name in enumerate(NUMERIC_COLUMNS):
            X[:, j] = self.numeric[name]
        off = len(NUMERIC_COLUMNS)
        for k in range(len(LAND_USE_LEVELS)):
            X[:, off + k] = self.land_use == k
        off += len(LAND_USE_LEVELS)
        for k in range(len(ASPECT_LEVELS)):
            X[:, off + k] = self.aspect == k
        X.setflags(write=False)
        return X

    @property
    def records(self) -> list[FireDayRecord]:
        out = []
        dates = self.date.astype(object)
        for i in range(len(self)):
            kw = {f: float(self.numeric[c][i]) for f, c in _RECORD_TO_COLUMN.items()}
            out.append(FireDayRecord(
                day_id=int(self.day_id[i]),
                date=dates[i],
                land_use=LAND_USE_LEVELS[self.land_use[i]],
                aspect=ASPECT_LEVELS[self.aspect[i]],
                outcome=None if self.outcome is None else int(self.outcome[i]),
                **kw,
            ))
        return out

    @classmethod
    def from_records(cls, scenario_id: str, records: Sequence[FireDayRecord]):
        has_y = [r.outcome is not None for r in records]
        if any(has_y) and not all(has_y):
            raise errors.MissingColumn("outcome present on some records but not others")
        for r in records:
            if r.land_use not in LAND_USE_LEVELS:
                raise errors.BadCategoryLevel(f"day {r.day_id}: land_use {r.land_use!r}")
            if r.aspect not in ASPECT_LEVELS:
                raise errors.BadCategoryLevel(f"day {r.day_id}: aspect {r.aspect!r}")
        return cls(
            scenario_id=scenario_id,
            day_id=np.array([r.day_id for r in records], dtype=np.int64),
            date=np.array([np.datetime64(r.date, "D") for r in records], dtype="datetime64[D]"),
            numeric={c: np.array([getattr(r, f) for r in records], dtype=float)
                     for f, c in _RECORD_TO_COLUMN.items()},
            land_use=np.array([LAND_USE_LEVELS.index(r.land_use) for r in records]),
            aspect=np.array([ASPECT_LEVELS.index(r.aspect) for r in records]),
            outcome=np.array([r.outcome for r in records]) if records and all(has_y) else None,
        )

    def take(self, index) -> "ScenarioDataset":
        index = np.asarray(index)
        return ScenarioDataset(
            scenario_id=self.scenario_id,
            day_id=self.day_id[index],
            date=self.date[index],
            numeric={k: v[index] for k, v in self.numeric.items()},
            land_use=self.land_use[index],
            aspect=self.aspect[index],
            outcome=None if self.outcome is None else self.outcome[index],
            schema_version=self.schema_version,
        )

    def replace(self, *, scenario_id=None, numeric=None, outcome=..., drop_outcome=False):
        """Copy with some columns swapped; ``numeric`` entries override by name."""
        new_numeric = dict(self.numeric)
        if numeric:
            new_numeric.update(numeric)
        if drop_outcome:
            y = None
        elif outcome is ...:
            y = self.outcome
        else:
            y = outcome
        return ScenarioDataset(
            scenario_id=scenario_id or self.scenario_id,
            day_id=self.day_id,
            date=self.date,
            numeric=new_numeric,
            land_use=self.land_use,
            aspect=self.aspect,
            outcome=y,
            schema_version=self.schema_version,
        )

    def with_outcome(self, y) -> "ScenarioDataset":
        return self.replace(outcome=np.asarray(y))

    def to_csv_bytes(self, include_outcome: bool | None = None) -> bytes:
        if include_outcome is None:
            include_outcome = self.outcome is not None
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        header = list(CSV_COLUMNS) + (["outcome"] if include_outcome else [])
        writer.writerow(header)
        dates = np.datetime_as_string(self.date, unit="D")
        for i in range(len(self)):
            row = [str(int(self.day_id[i])), dates[i]]
            for c in ("temperature", "vpd", "fm100", "fm1000", "precip", "wind"):
                row.append(repr(float(self.numeric[c][i])))
            row.append(LAND_USE_LEVELS[self.land_use[i]])
            row.append(ASPECT_LEVELS[self.aspect[i]])
            for c in ("slope", "elevation", "veg_frac"):
                row.append(repr(float(self.numeric[c][i])))
            if include_outcome:
                row.append(str(int(self.outcome[i])))
            writer.writerow(row)
        return buf.getvalue().encode("utf-8")


def ingest_csv(data: bytes, scenario_id: str) -> ScenarioDataset:
    """Parse a scenario CSV (exact header, ISO dates) into a validated dataset."""
    validate_scenario_id(scenario_id)
    text = data.decode("utf-8-sig") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise errors.MissingColumn("empty CSV: no header row") from None
    for col in CSV_COLUMNS:
        if col not in header:
            raise errors.MissingColumn(f"header is missing column {col!r}")
    has_outcome = "outcome" in header
    expected = list(CSV_COLUMNS) + (["outcome"] if has_outcome else [])
    if header != expected:
        extra = [h for h in header if h not in expected]
        if extra:
            raise errors.UnexpectedColumn(f"unexpected column(s) {extra}")
        raise errors.MissingColumn(f"header order must be {','.join(expected)}")
    if scenario_id == OBSERVED and not has_outcome:
        raise errors.MissingColumn("column 'outcome' is required for the Observed scenario")
    if has_outcome and scenario_id in (PRE_INDUSTRIAL, SSP585_EOC):
        raise errors.UnexpectedColumn(f"counterfactual scenario {scenario_id} cannot carry outcomes")

    rows = list(reader)
    n = len(rows)
    day_id = np.empty(n, dtype=np.int64)
    dates = np.empty(n, dtype="datetime64[D]")
    numeric = {c: np.empty(n) for c in NUMERIC_COLUMNS}
    land = np.empty(n, dtype=np.int8)
    aspect = np.empty(n, dtype=np.int8)
    outcome = np.empty(n, dtype=np.int8) if has_outcome else None
    seen = {}
    for i, row in enumerate(rows):
        line = i + 2  # 1-based, after header
        if len(row) != len(expected):
            raise errors.MissingColumn(f"row {line}: expected {len(expected)} fields, got {len(row)}")
        rec = dict(zip(expected, row))
        try:
            day_id[i] = int(rec["day_id"])
        except ValueError:
            raise errors.InvalidValue(f"row {line}, column 'day_id': {rec['day_id']!r}") from None
        if day_id[i] in seen:
            raise errors.DuplicateDayId(
                f"row {line}, column 'day_id': {day_id[i]} already used on row {seen[day_id[i]]}"
            )
        seen[day_id[i]] = line
        try:
            dates[i] = np.datetime64(_date.fromisoformat(rec["date"]), "D")
        except ValueError:
            raise errors.InvalidValue(f"row {line}, column 'date': {rec['date']!r} is not ISO-8601") from None
        for c in NUMERIC_COLUMNS:
            try:
                v = float(rec[c])
            except ValueError:
                raise errors.InvalidValue(f"row {line}, column {c!r}: {rec[c]!r}") from None
            if not math.isfinite(v):
                raise errors.NonFiniteValue(f"row {line}, column {c!r}: {rec[c]!r}")
            numeric[c][i] = v
        if rec["land_use"] not in LAND_USE_LEVELS:
            raise errors.BadCategoryLevel(
                f"row {line}, column 'land_use': {rec['land_use']!r} not in {LAND_USE_LEVELS}"
            )
        land[i] = LAND_USE_LEVELS.index(rec["land_use"])
        if rec["aspect"] not in ASPECT_LEVELS:
            raise errors.BadCategoryLevel(
                f"row {line}, column 'aspect': {rec['aspect']!r} not in {ASPECT_LEVELS}"
            )
        aspect[i] = ASPECT_LEVELS.index(rec["aspect"])
        if has_outcome:
            if rec["outcome"] not in ("0", "1"):
                raise errors.InvalidValue(f"row {line}, column 'outcome': {rec['outcome']!r}")
            outcome[i] = int(rec["outcome"])
    return ScenarioDataset(
        scenario_id=scenario_id, day_id=day_id, date=dates, numeric=numeric,
        land_use=land, aspect=aspect, outcome=outcome,
    )


def check_pairing(factual: ScenarioDataset, counterfactual: ScenarioDataset) -> ScenarioDataset:
    """Verify two scenarios describe the same days; return ``counterfactual``
    reordered to ``factual``'s day order."""
    if len(factual) != len(counterfactual):
        raise errors.PairingViolation(
            f"{factual.scenario_id} has {len(factual)} days, "
            f"{counterfactual.scenario_id} has {len(counterfactual)}"
        )
    order_f = np.argsort(factual.day_id, kind="stable")
    order_c = np.argsort(counterfactual.day_id, kind="stable")
    if not np.array_equal(factual.day_id[order_f], counterfactual.day_id[order_c]):
        raise errors.PairingViolation("scenarios do not share the same day_id set")
    index = np.empty(len(factual), dtype=np.int64)
    index[order_f] = order_c
    cf = counterfactual if np.array_equal(index, np.arange(len(index))) else counterfactual.take(index)
    checks = [("date", factual.date, cf.date), ("land_use", factual.land_use, cf.land_use),
              ("aspect", factual.aspect, cf.aspect)]
    checks += [(c, factual.numeric[c], cf.numeric[c]) for c in PAIRED_COLUMNS]
    for name, a, b in checks:
        diff = np.flatnonzero(a != b)
        if diff.size:
            i = int(diff[0])
            raise errors.PairingViolation(
                f"column {name!r} differs on day_id {int(factual.day_id[i])}: "
                f"{a[i]!r} vs {b[i]!r}"
            )
    return cf


# -- temporal folds ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldBlock:
    label: str
    year_start: int
    year_end: int
    day_ids: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldPlan:
    blocks: tuple[FoldBlock, ...]
    block_years: int

    @property
    def labels(self) -> list[str]:
        return [b.label for b in self.blocks]

    def __len__(self):
        return len(self.blocks)

    def block_index(self, dataset: ScenarioDataset) -> np.ndarray:
        """Block number of every row of ``dataset`` (by day_id)."""
        out = np.full(len(dataset), -1, dtype=np.int64)
        for b, block in enumerate(self.blocks):
            out[np.isin(dataset.day_id, block.day_ids)] = b
        if (out < 0).any():
            i = int(np.flatnonzero(out < 0)[0])
            raise errors.PairingViolation(
                f"day_id {int(dataset.day_id[i])} is not covered by the fold plan"
            )
        return out

    def labels_for(self, dataset: ScenarioDataset) -> np.ndarray:
        return np.array(self.labels, dtype=object)[self.block_index(dataset)]


def plan_temporal_folds(dataset: ScenarioDataset, block_years: int = 3) -> FoldPlan:
    """Group days into consecutive ``block_years``-year calendar blocks.

    The last block may be shorter; blocks containing no days are omitted.
    """
    if block_years < 1:
        raise ValueError("block_years must be >= 1")
    years = dataset.years
    if len(years) == 0:
        raise errors.InsufficientSpan("dataset is empty")
    y0, y1 = int(years.min()), int(years.max())
    blocks = []
    for start in range(y0, y1 + 1, block_years):
        end = min(start + block_years - 1, y1)
        mask = (years >= start) & (years <= end)
        if mask.any():
            ids = dataset.day_id[mask].copy()
            ids.setflags(write=False)
            blocks.append(FoldBlock(f"{start}-{end}", start, end, ids))
    if len(blocks) < 2:
        raise errors.InsufficientSpan(
            f"years {y0}-{y1} give {len(blocks)} block(s) of {block_years} years; need >= 2"
        )
    return FoldPlan(tuple(blocks), block_years)


# -- synthetic scenarios -----------------------------------------------------

DEFAULT_COEFFICIENTS = {
    "temperature": 0.40,
    "vpd": 0.40,
    "fm100": -0.30,
    "fm1000": -0.15,
    "precip": -0.35,
    "wind": 0.55,
    "slope": 0.10,
    "elevation": -0.15,
    "veg_frac": 0.25,
    "land_use=shrub": 0.30,
    "land_use=savanna_grassland": -0.20,
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Declared synthetic world.

    Truth: ``logit(pi) = intercept + sum(coef * z) + temperature_quadratic * max(z_T - quadratic_knot, 0)**2``
    with ``z`` the predictors standardized by the observed-design mean/sd
    (categorical keys like ``"land_use=shrub"`` act on indicators). The
    intercept is solved so that ``mean(pi0) == base_rate``.

    The counterfactual shifts temperature by ``temperature_shift`` and moves
    VPD / fuel moisture by ``coupling * temperature_shift``.
    """

    n_days: int = 20_000
    start_year: int = 2003
    end_year: int = 2020
    temperature_shift: float = 0.0
    vpd_coupling: float = 0.25
    fm100_coupling: float = -0.45
    fm1000_coupling: float = -0.30
    base_rate: float = 0.021
    coefficients: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    temperature_quadratic: float = 2.0
    quadratic_knot: float = 1.0
    design_seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        unknown = set(self.coefficients) - set(FEATURE_NAMES)
        if unknown:
            raise errors.DegenerateConfig(f"unknown coefficient name(s): {sorted(unknown)}")
        if self.n_days < 10:
            raise errors.DegenerateConfig("n_days must be >= 10")
        if not 0 < self.base_rate < 1:
            raise errors.DegenerateConfig("base_rate must lie in (0, 1)")
        if self.end_year < self.start_year:
            raise errors.DegenerateConfig("end_year precedes start_year")


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    day_id: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    generator_params: dict
    seed: int

    def __post_init__(self):
        for name in ("pi0", "pi1"):
            v = getattr(self, name)
            if not ((v > 0) & (v < 1)).all():
                raise errors.ProbabilityOutOfRange(f"{name} must lie strictly inside (0, 1)")


_PI_CLIP = 1e-12


def _draw_design(config: GeneratorConfig):
    rng = derive_rng(config.design_seed, "generate", "design")
    n = config.n_days
    n_years = config.end_year - config.start_year + 1
    year = config.start_year + rng.integers(0, n_years, size=n)
    # Fire season, May through November.
    doy = rng.integers(121, 335, size=n)
    dates = (year - 1970).astype("datetime64[Y]").astype("datetime64[D]") + (doy - 1)
    order = np.lexsort((doy, year))
    year, dates = year[order], dates[order]

    trend = 0.04 * (year - (config.start_year + config.end_year) / 2)
    temperature = 27.0 + trend + rng.normal(0.0, 4.5, n)
    vpd = np.maximum(0.05, 2.0 + 0.10 * (temperature - 27.0) + rng.normal(0.0, 0.35, n))
    fm100 = np.maximum(1.0, 9.0 - 0.35 * (temperature - 27.0) + rng.normal(0.0, 1.5, n))
    fm1000 = np.maximum(2.0, 12.0 - 0.20 * (temperature - 27.0) + 0.5 * (fm100 - 9.0)
                        + rng.normal(0.0, 1.2, n))
    precip = np.where(rng.random(n) < 0.75, 0.0, rng.exponential(4.0, n))
    wind = rng.gamma(4.0, 1.0, n)
    land_use = rng.choice(3, size=n, p=[0.40, 0.35, 0.25])
    aspect = rng.integers(0, 4, size=n)
    slope = np.minimum(45.0, np.abs(rng.normal(0.0, 12.0, n)))
    elevation = np.exp(rng.normal(np.log(700.0), 0.6, n))
    veg_frac = rng.beta(2.0, 2.0, n)
    numeric = {
        "temperature": temperature, "vpd": vpd, "fm100": fm100, "fm1000": fm1000,
        "precip": precip, "wind": wind, "slope": slope, "elevation": elevation,
        "veg_frac": veg_frac,
    }
    return np.arange(n, dtype=np.int64), dates, numeric, land_use, aspect


def _shift_weather(numeric, config: GeneratorConfig):
    d = config.temperature_shift
    out = dict(numeric)
    if d == 0.0:
        return out
    out["temperature"] = numeric["temperature"] + d
    out["vpd"] = np.maximum(0.05, numeric["vpd"] + config.vpd_coupling * d)
    out["fm100"] = np.maximum(0.5, numeric["fm100"] + config.fm100_coupling * d)
    out["fm1000"] = np.maximum(0.5, numeric["fm1000"] + config.fm1000_coupling * d)
    return out


class TruthFunction:
    """Frozen synthetic risk surface; evaluate with :meth:`__call__`."""

    def __init__(self, center, scale, coefficients, quadratic, intercept=0.0, knot=0.0):
        self.center = np.asarray(center, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.coef = np.array([coefficients.get(f, 0.0) for f in FEATURE_NAMES])
        self.quadratic = float(quadratic)
        self.knot = float(knot)
        self.intercept = float(intercept)

    def linear_part(self, X):
        z = (X - self.center) / self.scale
        t = FEATURE_NAMES.index("temperature")
        # One-sided: risk accelerates only above the knot (in sd units).
        hot = np.maximum(z[:, t] - self.knot, 0.0)
        return z @ self.coef + self.quadratic * hot * hot

    def __call__(self, X):
        p = expit(self.intercept + self.linear_part(X))
        return np.clip(p, _PI_CLIP, 1 - _PI_CLIP)

    def params(self) -> dict:
        return {
            "feature_names": list(FEATURE_NAMES),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "coefficients": self.coef.tolist(),
            "temperature_quadratic": self.quadratic,
            "quadratic_knot": self.knot,
            "intercept": self.intercept,
        }


def fit_intercept(linear_part, base_rate, lo=-40.0, hi=40.0):
    """Intercept so that ``mean(expit(b + linear_part)) == base_rate``."""
    return brentq(lambda b: float(np.mean(expit(b + linear_part))) - base_rate,
                  lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)


def generate_synthetic(config: GeneratorConfig, seed: int):
    """Paired synthetic scenarios with known per-day event probabilities.

    Predictors depend only on ``config`` (``design_seed``); ``seed`` drives
    the sampled outcomes, so different seeds share the same truth vectors.
    Returns ``(observed, counterfactual, truth)``.
    """
    coef_nonzero = any(v != 0 for v in config.coefficients.values()) or config.temperature_quadratic != 0
    if config.temperature_shift != 0 and not coef_nonzero:
        raise errors.DegenerateConfig(
            "all truth coefficients are zero, so a temperature shift cannot change risk"
        )
    day_id, dates, numeric, land_use, aspect = _draw_design(config)
    obs_id = synthetic_id(f"{config.name}/observed")
    cf_id = synthetic_id(f"{config.name}/counterfactual")
    observed = ScenarioDataset(obs_id, day_id, dates, numeric, land_use, aspect,
                               outcome=np.zeros(len(day_id), dtype=np.int8))
    cf = observed.replace(scenario_id=cf_id, numeric=_shift_weather(numeric, config),
                          drop_outcome=True)

    X0 = observed.features
    center = X0.mean(axis=0)
    scale = X0.std(axis=0)
    scale[scale == 0] = 1.0
    # Indicators stay on the 0/1 scale so categorical coefficients read as log-odds shifts.
    for j, name in enumerate(FEATURE_NAMES):
        if "=" in name:
            center[j], scale[j] = 0.0, 1.0
    truth_fn = TruthFunction(center, scale, config.coefficients, config.temperature_quadratic,
                             knot=config.quadratic_knot)
    truth_fn.intercept = fit_intercept(truth_fn.linear_part(X0), config.base_rate)
    pi0 = truth_fn(X0)
    pi1 = pi0.copy() if config.temperature_shift == 0 else truth_fn(cf.features)

    observed = observed.with_outcome(sample_outcomes(pi0, seed))
    truth = SyntheticTruth(day_id=observed.day_id, pi0=_readonly(pi0), pi1=_readonly(pi1),
                           generator_params=truth_fn.params(), seed=int(seed))
    return observed, cf, truth


def sample_outcomes(probs, seed: int) -> np.ndarray:
    """Independent Bernoulli draws, reproducible given ``seed``."""
    p = np.asarray(probs, dtype=np.float64)
    if not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
        raise errors.ProbabilityOutOfRange("probabilities must lie in [0, 1]")
    rng = derive_rng(seed, "sample_outcomes")
    return (rng.random(p.shape) < p).astype(np.int8)
