"""Synthetic daily datasets with a known planted risk structure.

The generator writes the same three CSV schemas the ingestion step
consumes. Weather follows simple seasonal/stochastic models: temperature
and the vegetation index follow annual cycles peaking in summer (the
index sampled every 16 days like a satellite composite), wind speeds
concentrate near 5 m/s with a heavy upper tail, and a small fraction of
weather cells is blanked to exercise imputation.

Outage labels are drawn from the same log-odds-linear family the risk
model fits, using caller-chosen coefficients on internally standardised
features, then thinned or boosted to an exact positive-day count. Sign
and ranking recovery can therefore be tested against known ground truth.
All values are quantised before the label draw, so a pipeline reading the
files back reconstructs exactly the features the labels came from.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import CONTINUOUS_FEATURES, FEATURE_NAMES, build_feature_table
from .ingest import (
    DEFAULT_VEGETATION_CAUSES,
    EVI_COLUMNS,
    OUTAGE_COLUMNS,
    WEATHER_COLUMNS,
    RawEviRecord,
    RawOutageRecord,
    RawWeatherRecord,
    daily_evi_series,
    impute_weather,
    join_daily,
)
from .model import sigmoid
from .rng import stage_rng

log = logging.getLogger(__name__)

DEFAULT_PLANTED_COEFFICIENTS = {
    "wspd": 1.5,
    "evi": 0.8,
    "ws_evi": -0.5,
    "snow_type_Wet_Snow": 3.0,
}

NON_VEGETATION_CAUSES = ("Equipment Failure", "Lightning", "Animal Contact")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    years: int = 10
    start_year: int = 2015
    target_outages: int | None = 149  # None: derive from base_rate
    base_rate: float = 0.04
    planted_coefficients: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PLANTED_COEFFICIENTS))
    vegetation_causes: tuple[str, ...] = DEFAULT_VEGETATION_CAUSES
    missing_fraction: float = 0.005  # per weather cell
    evi_gap_days: int = 0  # drop composites this close to the end of range
    extra_cause_days: int = 30  # days with a non-vegetation outage record

    def __post_init__(self):
        if self.years < 1:
            raise ValidationError(f"years must be >= 1, got {self.years}")
        if self.target_outages is not None and self.target_outages < 0:
            raise ValidationError(f"target_outages must be >= 0, got {self.target_outages}")
        if not 0.0 < self.base_rate < 1.0:
            raise ValidationError(f"base_rate must lie in (0, 1), got {self.base_rate}")
        if not 0.0 <= self.missing_fraction <= 0.01:
            raise ValidationError(f"missing_fraction must lie in [0, 0.01], got {self.missing_fraction}")
        if self.evi_gap_days < 0 or self.extra_cause_days < 0:
            raise ValidationError("evi_gap_days and extra_cause_days must be >= 0")
        if not self.vegetation_causes:
            raise ValidationError("vegetation_causes must not be empty")
        for name, value in self.planted_coefficients.items():
            if name not in FEATURE_NAMES:
                raise ValidationError(f"planted coefficient for unknown feature {name!r}")
            if not math.isfinite(value):
                raise ValidationError(f"planted coefficient for {name!r} must be finite")


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth of one generated dataset, for recovery tests."""

    alpha: float
    coefficients: dict[str, float]
    positive_days: tuple[date, ...]


@dataclass(frozen=True)
class SyntheticDataset:
    weather: list[RawWeatherRecord]  # with blanked cells, as written to CSV
    evi: list[RawEviRecord]
    outages: list[RawOutageRecord]
    truth: PlantedTruth


def _quantize(x: float, decimals: int) -> float:
    # value equals its CSV rendering, so files round-trip exactly
    return float(f"{x:.{decimals}f}") + 0.0


def _calibrate_intercept(contributions: np.ndarray, target: int) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if float(sigmoid(mid + contributions).sum()) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def generate(config: SynthConfig) -> SyntheticDataset:
    """Generate one dataset; byte-identical files under a fixed seed."""
    start = date(config.start_year, 1, 1)
    end = date(config.start_year + config.years, 1, 1) - timedelta(days=1)
    days = [start + timedelta(days=i) for i in range((end - start).days + 1)]
    n = len(days)
    target = config.target_outages if config.target_outages is not None else round(config.base_rate * n)
    if target > n:
        raise ValidationError(f"target_outages {target} exceeds the {n} generated days")

    doy = np.array([d.timetuple().tm_yday for d in days], dtype=float)
    rng = stage_rng(config.seed, "synth.weather")

    tavg = 9.0 - 11.0 * np.cos(2.0 * np.pi * (doy - 15.0) / 365.25) + rng.normal(0.0, 3.0, n)
    wet = rng.random(n) < 0.35
    prcp = np.where(wet, rng.gamma(0.9, 6.0, n), 0.0)
    storm = rng.random(n) < 0.02
    wspd = np.where(storm, rng.uniform(12.0, 33.0, n), rng.gamma(3.0, 2.5, n))
    wdir = np.degrees(rng.vonmises(np.radians(270.0) - np.pi, 0.8, n) + np.pi) % 360.0

    tavg = [_quantize(v, 1) for v in tavg]
    prcp = [_quantize(max(v, 0.0), 1) for v in prcp]
    wspd = [_quantize(max(v, 0.0), 1) for v in wspd]
    wdir = [float(int(round(v)) % 360) for v in wdir]

    # blank a small fraction of cells (never in the 3 leading days the
    # imputation rule needs)
    miss_rng = stage_rng(config.seed, "synth.missing")
    blank = miss_rng.random((n, 4)) < config.missing_fraction
    blank[:3, :] = False
    weather = [
        RawWeatherRecord(
            days[i],
            None if blank[i, 0] else tavg[i],
            None if blank[i, 1] else prcp[i],
            None if blank[i, 2] else wspd[i],
            None if blank[i, 3] else wdir[i],
        )
        for i in range(n)
    ]

    evi_rng = stage_rng(config.seed, "synth.evi")
    last_composite = end - timedelta(days=config.evi_gap_days)
    evi_records = []
    day = start
    while day <= last_composite:
        seasonal = 0.33 + 0.27 * math.cos(2.0 * math.pi * (day.timetuple().tm_yday - 197.0) / 365.25)
        value = _quantize(float(np.clip(seasonal + evi_rng.normal(0.0, 0.02), -1.0, 1.0)), 4)
        evi_records.append(RawEviRecord(day, value))
        day += timedelta(days=16)
    if len(evi_records) < 2:
        raise ValidationError("date range too short for vegetation composites")

    # the pipeline-visible values: repair the blanked weather and expand
    # the composites exactly as ingestion will
    effective = impute_weather(weather)
    evi_daily = daily_evi_series(evi_records, start, end)
    samples = join_daily(effective, evi_daily, [], config.vegetation_causes)
    table = build_feature_table(samples)

    contributions = np.zeros(n)
    for name, coef in config.planted_coefficients.items():
        col = table.column(name)
        if name in CONTINUOUS_FEATURES:
            sigma = float(col.std())
            if sigma == 0.0:
                log.warning("planted feature %s is constant; it contributes nothing", name)
                continue
            col = (col - col.mean()) / sigma
        contributions = contributions + coef * col

    label_rng = stage_rng(config.seed, "synth.labels")
    if target == 0:
        labels = np.zeros(n, dtype=bool)
        alpha = -math.inf
    else:
        alpha = _calibrate_intercept(contributions, target)
        p = sigmoid(alpha + contributions)
        labels = label_rng.random(n) < p
        positives = np.flatnonzero(labels)
        if len(positives) > target:
            drop = label_rng.choice(positives, size=len(positives) - target, replace=False)
            labels[drop] = False
        elif len(positives) < target:
            negatives = np.flatnonzero(~labels)
            order = negatives[np.argsort(-p[negatives], kind="stable")]
            labels[order[: target - len(positives)]] = True

    outage_rng = stage_rng(config.seed, "synth.outages")
    causes = tuple(config.vegetation_causes)
    records: list[RawOutageRecord] = []
    positive_days = tuple(days[i] for i in np.flatnonzero(labels))
    for day in positive_days:
        for _ in range(2 if outage_rng.random() < 0.15 else 1):
            records.append(
                RawOutageRecord(
                    date=day,
                    cause=causes[int(outage_rng.integers(len(causes)))],
                    location=f"Feeder-{int(outage_rng.integers(1, 13)):02d}",
                    duration_min=_quantize(float(outage_rng.gamma(2.0, 90.0)), 0),
                    customers=int(outage_rng.integers(1, 250)),
                )
            )
    extra = min(config.extra_cause_days, n)
    for i in sorted(outage_rng.choice(n, size=extra, replace=False)):
        records.append(
            RawOutageRecord(
                date=days[int(i)],
                cause=NON_VEGETATION_CAUSES[int(outage_rng.integers(len(NON_VEGETATION_CAUSES)))],
                location=f"Feeder-{int(outage_rng.integers(1, 13)):02d}",
                duration_min=_quantize(float(outage_rng.gamma(2.0, 90.0)), 0),
                customers=int(outage_rng.integers(1, 250)),
            )
        )
    records.sort(key=lambda r: (r.date, r.cause, r.location))

    truth = PlantedTruth(alpha, dict(config.planted_coefficients), positive_days)
    return SyntheticDataset(weather, evi_records, records, truth)


def write_weather_csv(records: list[RawWeatherRecord], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(WEATHER_COLUMNS)
        for r in records:
            writer.writerow(
                (
                    r.date.isoformat(),
                    "" if r.tavg is None else f"{r.tavg:.1f}",
                    "" if r.prcp is None else f"{r.prcp:.1f}",
                    "" if r.wspd is None else f"{r.wspd:.1f}",
                    "" if r.wdir is None else f"{r.wdir:.0f}",
                )
            )


def write_evi_csv(records: list[RawEviRecord], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(EVI_COLUMNS)
        for r in records:
            writer.writerow((r.date.isoformat(), f"{r.evi:.4f}"))


def write_outages_csv(records: list[RawOutageRecord], path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(OUTAGE_COLUMNS)
        for r in records:
            writer.writerow((r.date.isoformat(), r.cause, r.location, f"{r.duration_min:.0f}", r.customers))


def write_dataset(dataset: SyntheticDataset, out_dir) -> dict[str, Path]:
    """Write the three CSVs into a directory; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "weather": out / "weather.csv",
        "evi": out / "evi.csv",
        "outages": out / "outages.csv",
    }
    write_weather_csv(dataset.weather, paths["weather"])
    write_evi_csv(dataset.evi, paths["evi"])
    write_outages_csv(dataset.outages, paths["outages"])
    return paths
