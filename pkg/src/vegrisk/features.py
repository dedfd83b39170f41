"""Model features from daily samples.

Seasons, snow classes, orthogonal wind components, wind interactions,
one-hot dummies, binned outage rates, and train-fitted standard scaling.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import RowError, SchemaError, ValidationError
from .ingest import DailySample, _parse_date, _parse_float

log = logging.getLogger(__name__)

SEASONS = ("winter", "spring", "summer", "autumn")
SNOW_TYPES = ("No_Snow", "Dry_Snow", "Wet_Snow")

# spring and Dry_Snow are the dropped reference categories
SEASON_DUMMIES = ("season_summer", "season_autumn", "season_winter")
SNOW_DUMMIES = ("snow_type_No_Snow", "snow_type_Wet_Snow")

CONTINUOUS_FEATURES = (
    "tavg", "prcp", "wspd", "evi",
    "wind_x", "wind_y", "cos_wdir", "sin_wdir",
    "ws_evi", "wind_temp",
)
FEATURE_NAMES = CONTINUOUS_FEATURES + SEASON_DUMMIES + SNOW_DUMMIES

DEFAULT_WIND_BIN_EDGES = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)

WIND_CONVENTIONS = ("raw", "meteorological")


@dataclass
class FeatureTable:
    """Ordered feature names, numeric rows, binary labels, per-row dates."""

    feature_names: list[str]
    rows: np.ndarray
    labels: np.ndarray
    dates: list[date]
    synthetic: np.ndarray | None = None  # marks resampler-generated rows

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.rows.ndim != 2:
            raise ValidationError("rows must be a 2-D matrix")
        n, width = self.rows.shape
        if len(self.feature_names) != width:
            raise ValidationError(f"{len(self.feature_names)} feature names for {width} columns")
        if len(set(self.feature_names)) != width:
            raise ValidationError("feature names must be unique")
        if self.labels.shape != (n,):
            raise ValidationError("label length must equal row count")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ValidationError("labels must be 0 or 1")
        if len(self.dates) != n:
            raise ValidationError("dates length must equal row count")
        if self.synthetic is not None:
            self.synthetic = np.asarray(self.synthetic, dtype=bool)
            if self.synthetic.shape != (n,):
                raise ValidationError("synthetic marker length must equal row count")

    def __len__(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown feature {name!r}") from None
        return self.rows[:, j]

    def subset(self, index) -> FeatureTable:
        """New table holding the selected rows (slice, bool mask, or indices)."""
        if isinstance(index, slice):
            positions = range(*index.indices(len(self)))
        else:
            arr = np.asarray(index)
            positions = np.flatnonzero(arr) if arr.dtype == bool else arr
        dates = [self.dates[int(i)] for i in positions]
        synthetic = None if self.synthetic is None else self.synthetic[index].copy()
        return FeatureTable(list(self.feature_names), self.rows[index].copy(), self.labels[index].copy(), dates, synthetic)

    def copy(self) -> FeatureTable:
        return self.subset(slice(None))


def derive_season(day: date) -> str:
    """Meteorological season: Dec-Feb winter, Mar-May spring, and so on."""
    month = day.month
    if month in (12, 1, 2):
        return "winter"
    if month in (3, 4, 5):
        return "spring"
    if month in (6, 7, 8):
        return "summer"
    return "autumn"


def classify_snow(prcp: float, tavg: float) -> str:
    """Snow class from precipitation (mm) and temperature (deg C).

    Dry snow needs sub-zero cold; wet snow the 0..2 C band where dense
    snow sticks to lines and branches. Warmer precipitation is rain and
    counts as No_Snow so the three classes stay exhaustive.
    """
    if prcp < 0:
        raise ValidationError(f"prcp must be >= 0, got {prcp}")
    if prcp == 0:
        return "No_Snow"
    if tavg < 0:
        return "Dry_Snow"
    if tavg <= 2:
        return "Wet_Snow"
    return "No_Snow"


def decompose_wind(wspd: float, wdir: float) -> tuple[float, float, float, float]:
    """Split a wind vector into orthogonal components.

    Returns (east-west component, north-south component, cos of the
    angle, sin of the angle); the components satisfy vx^2 + vy^2 = wspd^2.
    """
    theta = math.radians(wdir)
    c, s = math.cos(theta), math.sin(theta)
    return wspd * c, wspd * s, c, s


def build_interactions(wspd: float, evi: float, tavg: float) -> tuple[float, float]:
    """Products of raw wind speed with vegetation index and temperature."""
    return wspd * evi, wspd * tavg


def one_hot_encode(season: str, snow_type: str) -> dict[str, float]:
    """Dummy-encode season and snow class against their reference levels.

    spring and Dry_Snow map to all-zero dummies.
    """
    if season not in SEASONS:
        raise ValidationError(f"unknown season {season!r}")
    if snow_type not in SNOW_TYPES:
        raise ValidationError(f"unknown snow type {snow_type!r}")
    values = dict.fromkeys(SEASON_DUMMIES + SNOW_DUMMIES, 0.0)
    for key in (f"season_{season}", f"snow_type_{snow_type}"):
        if key in values:
            values[key] = 1.0
    return values


def build_feature_table(samples: list[DailySample], wind_convention: str = "raw") -> FeatureTable:
    """Assemble the full model matrix from daily samples.

    Interactions use raw (unscaled) values; standardisation is a
    separate, train-fitted step. ``wind_convention="meteorological"``
    converts direction-from angles to math-convention angles before the
    decomposition.
    """
    if not samples:
        raise ValidationError("no samples to build features from")
    if wind_convention not in WIND_CONVENTIONS:
        raise ValidationError(f"wind_convention must be one of {WIND_CONVENTIONS}, got {wind_convention!r}")
    rows = np.empty((len(samples), len(FEATURE_NAMES)))
    labels = np.empty(len(samples), dtype=int)
    dates: list[date] = []
    for i, s in enumerate(samples):
        wdir = s.wdir if wind_convention == "raw" else (270.0 - s.wdir) % 360.0
        wind_x, wind_y, cos_wdir, sin_wdir = decompose_wind(s.wspd, wdir)
        ws_evi, wind_temp = build_interactions(s.wspd, s.evi, s.tavg)
        values = {
            "tavg": s.tavg, "prcp": s.prcp, "wspd": s.wspd, "evi": s.evi,
            "wind_x": wind_x, "wind_y": wind_y, "cos_wdir": cos_wdir, "sin_wdir": sin_wdir,
            "ws_evi": ws_evi, "wind_temp": wind_temp,
        }
        values.update(one_hot_encode(derive_season(s.date), classify_snow(s.prcp, s.tavg)))
        rows[i] = [values[name] for name in FEATURE_NAMES]
        labels[i] = s.outage
        dates.append(s.date)
    return FeatureTable(list(FEATURE_NAMES), rows, labels, dates)


def _format_edge(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class BinSpec:
    """Ordered bin edges; the bin above the last edge is open-ended."""

    edges: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) < 1:
            raise ValidationError("need at least one bin edge")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValidationError("bin edges must be strictly increasing")

    @property
    def labels(self) -> list[str]:
        out = [f"{_format_edge(a)}-{_format_edge(b)}" for a, b in zip(self.edges, self.edges[1:])]
        out.append(f"{_format_edge(self.edges[-1])}+")
        return out

    def index_of(self, value: float) -> int:
        if value < self.edges[0]:
            raise ValidationError(f"value {value} below first bin edge {self.edges[0]}")
        return int(np.searchsorted(self.edges, value, side="right")) - 1

    def assign(self, values) -> list[str]:
        labels = self.labels
        return [labels[self.index_of(v)] for v in values]


@dataclass(frozen=True)
class GroupRate:
    group: str
    total: int
    outages: int
    rate: float | None  # None marks an empty group, never reported as 0


@dataclass(frozen=True)
class GroupedRateReport:
    groups: tuple[GroupRate, ...]

    def rate_of(self, group: str) -> float | None:
        for g in self.groups:
            if g.group == group:
                return g.rate
        raise ValidationError(f"unknown group {group!r}")


def grouped_outage_rate(keys, outages, group_order=None) -> GroupedRateReport:
    """Per-group outage rate: positive days over total days in the group.

    ``group_order`` fixes the reported group set and order; groups with
    no members report rate None.
    """
    keys = list(keys)
    outages = list(outages)
    if len(keys) != len(outages):
        raise ValidationError("keys and outages length mismatch")
    if not keys:
        raise ValidationError("no samples to group")
    totals: dict[str, int] = {}
    positives: dict[str, int] = {}
    for key, y in zip(keys, outages):
        if y not in (0, 1):
            raise ValidationError(f"outage labels must be 0 or 1, got {y!r}")
        totals[key] = totals.get(key, 0) + 1
        positives[key] = positives.get(key, 0) + y
    if group_order is None:
        order = sorted(totals)
    else:
        order = list(group_order)
        unknown = sorted(set(totals) - set(order))
        if unknown:
            raise ValidationError(f"sample group {unknown[0]!r} not in group_order")
    groups = []
    for g in order:
        n, p = totals.get(g, 0), positives.get(g, 0)
        groups.append(GroupRate(g, n, p, p / n if n else None))
    return GroupedRateReport(tuple(groups))


def rates_by_wind_bin(samples: list[DailySample], bins: BinSpec) -> GroupedRateReport:
    """Outage rate per wind-speed bin over raw wind speeds."""
    keys = bins.assign(s.wspd for s in samples)
    return grouped_outage_rate(keys, [s.outage for s in samples], group_order=bins.labels)


def rates_by_snow_type(samples: list[DailySample]) -> GroupedRateReport:
    """Outage rate per snow class."""
    keys = [classify_snow(s.prcp, s.tavg) for s in samples]
    return grouped_outage_rate(keys, [s.outage for s in samples], group_order=SNOW_TYPES)


def write_rates_csv(report: GroupedRateReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("group", "total", "outages", "rate"))
        for g in report.groups:
            writer.writerow((g.group, g.total, g.outages, "" if g.rate is None else repr(g.rate)))


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature mean and population standard deviation (sigma 0 flags a
    constant column; such columns scale to 0 instead of dividing by 0)."""

    mean: dict[str, float]
    std: dict[str, float]

    def __post_init__(self):
        if set(self.mean) != set(self.std):
            raise ValidationError("mean and std must cover the same features")
        bad = sorted(name for name, s in self.std.items() if s < 0)
        if bad:
            raise ValidationError(f"negative standard deviation for {bad[0]!r}")

    @property
    def features(self) -> list[str]:
        return list(self.mean)

    @property
    def zero_variance(self) -> list[str]:
        return [name for name, s in self.std.items() if s == 0.0]


def fit_scaling(table: FeatureTable, continuous=CONTINUOUS_FEATURES) -> ScalingParams:
    """Mean and population standard deviation per continuous feature.

    Fit on training rows only; test rows must be scaled with these same
    parameters.
    """
    if len(table) < 2:
        raise ValidationError("need at least 2 rows to fit scaling")
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in continuous:
        col = table.column(name)
        mean[name] = float(col.mean())
        std[name] = float(col.std())  # ddof=0: population formula
        if std[name] == 0.0:
            log.warning("feature %s is constant on the fitted rows; it will scale to 0", name)
    return ScalingParams(mean, std)


def apply_scaling(table: FeatureTable, params: ScalingParams) -> FeatureTable:
    """Map each covered cell to (x - mean) / std; other columns untouched."""
    uncovered = [n for n in CONTINUOUS_FEATURES if n in table.feature_names and n not in params.mean]
    if uncovered:
        raise ValidationError(f"no scaling parameters for feature {uncovered[0]!r}")
    out = table.copy()
    for name in params.features:
        if name not in table.feature_names:
            raise ValidationError(f"scaling parameter for unknown feature {name!r}")
        j = table.feature_names.index(name)
        sigma = params.std[name]
        if sigma == 0.0:
            out.rows[:, j] = 0.0
        else:
            out.rows[:, j] = (out.rows[:, j] - params.mean[name]) / sigma
    return out


def invert_scaling(table: FeatureTable, params: ScalingParams) -> FeatureTable:
    """Undo apply_scaling for features with nonzero spread."""
    out = table.copy()
    for name in params.features:
        if name not in table.feature_names:
            raise ValidationError(f"scaling parameter for unknown feature {name!r}")
        j = table.feature_names.index(name)
        sigma = params.std[name]
        if sigma != 0.0:
            out.rows[:, j] = out.rows[:, j] * sigma + params.mean[name]
    return out


def write_table(table: FeatureTable, path) -> None:
    """Persist a feature table as CSV (features, then label and date)."""
    with_marker = table.synthetic is not None
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = list(table.feature_names) + ["label", "date"]
        if with_marker:
            header.append("synthetic")
        writer.writerow(header)
        for i in range(len(table)):
            row = [repr(float(v)) for v in table.rows[i]]
            row.append(int(table.labels[i]))
            row.append(table.dates[i].isoformat())
            if with_marker:
                row.append(int(table.synthetic[i]))
            writer.writerow(row)


def read_table(path, require_label: bool = True) -> FeatureTable:
    """Read a feature-table CSV written by write_table.

    Feature names come from the header (everything except the label,
    date, and synthetic columns). With ``require_label=False`` a missing
    label column reads as all-zero labels, for scoring-only inputs.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        if "date" not in header:
            raise SchemaError(f"{path}: missing required column(s): date")
        if require_label and "label" not in header:
            raise SchemaError(f"{path}: missing required column(s): label")
        names = [c for c in header if c not in ("label", "date", "synthetic")]
        if not names:
            raise SchemaError(f"{path}: no feature columns")
        has_marker = "synthetic" in header
        rows, labels, dates, marker = [], [], [], []
        for row in reader:
            line = reader.line_num
            rows.append([_parse_float(row[name], name, path, line) for name in names])
            dates.append(_parse_date(row["date"], path, line))
            if "label" in header:
                raw = (row["label"] or "").strip()
                if raw not in ("0", "1"):
                    raise RowError(path, line, f"label must be 0 or 1, got {raw!r}")
                labels.append(int(raw))
            else:
                labels.append(0)
            if has_marker:
                raw = (row["synthetic"] or "").strip()
                if raw not in ("0", "1"):
                    raise RowError(path, line, f"synthetic must be 0 or 1, got {raw!r}")
                marker.append(bool(int(raw)))
    return FeatureTable(
        names,
        np.asarray(rows, dtype=float).reshape(len(rows), len(names)),
        np.asarray(labels, dtype=int),
        dates,
        np.asarray(marker, dtype=bool) if has_marker else None,
    )
