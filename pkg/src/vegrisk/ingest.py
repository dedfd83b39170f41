"""CSV ingestion: parse raw inputs, repair gaps, align everything to days.

Raw inputs are three CSVs (daily weather, 16-day vegetation-index
composites, outage records). Output is one complete sample per calendar
day over the requested range: weather fields, a daily vegetation index,
and a binary label marking days with at least one vegetation-caused
outage.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from datetime import date, timedelta

from .errors import ImputationError, RowError, SchemaError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_VEGETATION_CAUSES = ("Tree Fall", "Branch Contact")

WEATHER_COLUMNS = ("date", "tavg", "prcp", "wspd", "wdir")
OUTAGE_COLUMNS = ("date", "cause", "location", "duration_min", "customers")
EVI_COLUMNS = ("date", "evi")
DAILY_COLUMNS = ("date", "tavg", "prcp", "wspd", "wdir", "evi", "outage")

# warn (do not fail) when a column is missing more often than this
MISSING_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class RawWeatherRecord:
    """One station-day; numeric fields may be missing before imputation."""

    date: date
    tavg: float | None  # average temperature, deg C
    prcp: float | None  # precipitation, mm
    wspd: float | None  # wind speed, m/s
    wdir: float | None  # wind direction, degrees in [0, 360)


@dataclass(frozen=True)
class RawOutageRecord:
    date: date
    cause: str
    location: str
    duration_min: float
    customers: int


@dataclass(frozen=True)
class RawEviRecord:
    date: date
    evi: float  # dimensionless, in [-1, 1]


@dataclass(frozen=True)
class DailySample:
    """One calendar day with every field present; the unit of the pipeline."""

    date: date
    tavg: float
    prcp: float
    wspd: float
    wdir: float
    evi: float
    outage: int


def _require_columns(path, fieldnames, required) -> None:
    present = fieldnames or []
    missing = [c for c in required if c not in present]
    if missing:
        raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")


def _parse_date(raw: str, path, line: int) -> date:
    try:
        return date.fromisoformat((raw or "").strip())
    except ValueError:
        raise RowError(path, line, f"unparseable date {raw!r}") from None


def _parse_float(raw: str, name: str, path, line: int, *, optional: bool = False) -> float | None:
    text = (raw or "").strip()
    if text == "":
        if optional:
            return None
        raise RowError(path, line, f"missing required value for {name}")
    try:
        return float(text)
    except ValueError:
        raise RowError(path, line, f"unparseable {name} {text!r}") from None


def parse_weather(path) -> list[RawWeatherRecord]:
    """Read a weather CSV into records sorted by date.

    Empty numeric cells become missing values for impute_weather to fill.
    Field invariants (wdir in [0, 360), wspd/prcp >= 0, unique dates) are
    enforced per row; violations name the offending line.
    """
    records: list[RawWeatherRecord] = []
    seen: dict[date, int] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(path, reader.fieldnames, WEATHER_COLUMNS)
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["date"], path, line)
            if day in seen:
                raise RowError(path, line, f"duplicate date {day.isoformat()} (first on line {seen[day]})")
            seen[day] = line
            tavg = _parse_float(row["tavg"], "tavg", path, line, optional=True)
            prcp = _parse_float(row["prcp"], "prcp", path, line, optional=True)
            wspd = _parse_float(row["wspd"], "wspd", path, line, optional=True)
            wdir = _parse_float(row["wdir"], "wdir", path, line, optional=True)
            if prcp is not None and prcp < 0:
                raise RowError(path, line, f"prcp must be >= 0, got {prcp}")
            if wspd is not None and wspd < 0:
                raise RowError(path, line, f"wspd must be >= 0, got {wspd}")
            if wdir is not None and not 0.0 <= wdir < 360.0:
                raise RowError(path, line, f"wdir must lie in [0, 360), got {wdir}")
            records.append(RawWeatherRecord(day, tavg, prcp, wspd, wdir))
    records.sort(key=lambda r: r.date)
    return records


def parse_outages(path) -> list[RawOutageRecord]:
    """Read an outage-record CSV; rows stay in date order."""
    records: list[RawOutageRecord] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(path, reader.fieldnames, OUTAGE_COLUMNS)
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["date"], path, line)
            cause = (row["cause"] or "").strip()
            if not cause:
                raise RowError(path, line, "empty cause")
            duration = _parse_float(row["duration_min"], "duration_min", path, line)
            if duration < 0:
                raise RowError(path, line, f"duration_min must be >= 0, got {duration}")
            raw_customers = (row["customers"] or "").strip()
            try:
                customers = int(raw_customers)
            except ValueError:
                raise RowError(path, line, f"unparseable customers {raw_customers!r}") from None
            if customers < 0:
                raise RowError(path, line, f"customers must be >= 0, got {customers}")
            records.append(RawOutageRecord(day, cause, (row["location"] or "").strip(), duration, customers))
    records.sort(key=lambda r: (r.date, r.cause, r.location))
    return records


def parse_evi(path) -> list[RawEviRecord]:
    """Read vegetation-index composites; values must lie in [-1, 1]."""
    records: list[RawEviRecord] = []
    seen: dict[date, int] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(path, reader.fieldnames, EVI_COLUMNS)
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["date"], path, line)
            if day in seen:
                raise RowError(path, line, f"duplicate date {day.isoformat()} (first on line {seen[day]})")
            seen[day] = line
            evi = _parse_float(row["evi"], "evi", path, line)
            if not -1.0 <= evi <= 1.0:
                raise RowError(path, line, f"evi must lie in [-1, 1], got {evi}")
            records.append(RawEviRecord(day, evi))
    records.sort(key=lambda r: r.date)
    return records


def _trailing_values(done: list[RawWeatherRecord], column: str, day: date, want: int = 3) -> list[float]:
    values: list[float] = []
    for rec in reversed(done):
        v = getattr(rec, column)
        if v is not None:
            values.append(v)
            if len(values) == want:
                break
    if not values:
        raise ImputationError(f"{column} missing on {day.isoformat()} with no prior data to impute from")
    return values


def _circular_mean_degrees(degrees: list[float]) -> float:
    x = sum(math.cos(math.radians(d)) for d in degrees)
    y = sum(math.sin(math.radians(d)) for d in degrees)
    out = math.degrees(math.atan2(y, x)) % 360.0
    return 0.0 if out >= 360.0 else out  # -1e-16 % 360 rounds to 360.0


def impute_weather(records: list[RawWeatherRecord]) -> list[RawWeatherRecord]:
    """Fill missing weather cells from the trailing three valued days.

    Each gap takes the arithmetic mean of the three most recent prior
    values in the same column; previously imputed values count, so runs
    of gaps keep filling forward. Wind direction averages on the unit
    circle instead: the mean of 350, 10 and 0 degrees is 0, not 120.
    """
    out: list[RawWeatherRecord] = []
    missing = dict.fromkeys(("tavg", "prcp", "wspd", "wdir"), 0)
    for rec in records:
        updates: dict[str, float] = {}
        for column in ("tavg", "prcp", "wspd"):
            if getattr(rec, column) is None:
                missing[column] += 1
                values = _trailing_values(out, column, rec.date)
                updates[column] = sum(values) / len(values)
        if rec.wdir is None:
            missing["wdir"] += 1
            updates["wdir"] = _circular_mean_degrees(_trailing_values(out, "wdir", rec.date))
        out.append(replace(rec, **updates) if updates else rec)
    for column, count in missing.items():
        if records and count / len(records) > MISSING_WARN_FRACTION:
            log.warning(
                "column %s has %.2f%% missing values (imputation is meant for <%.0f%%)",
                column, 100.0 * count / len(records), 100.0 * MISSING_WARN_FRACTION,
            )
    return out


def interpolate_evi(records: list[RawEviRecord], start: date, end: date) -> dict[date, float]:
    """Expand 16-day vegetation composites to one value per day.

    Days between composites interpolate linearly by day count; days at or
    before the first composite hold its value. Days after the last
    composite are not covered here: fill_evi_seasonal extends the series
    when the requested range outruns the composites.
    """
    if not records:
        raise ValidationError("no vegetation index records to interpolate")
    if len(records) < 2:
        raise ValidationError("need at least 2 vegetation composites")
    if start > end:
        raise ValidationError(f"empty date range {start.isoformat()}..{end.isoformat()}")
    knots = sorted(records, key=lambda r: r.date)
    for a, b in zip(knots, knots[1:]):
        if a.date == b.date:
            raise ValidationError(f"duplicate composite date {a.date.isoformat()}")
    out: dict[date, float] = {}
    stop = min(end, knots[-1].date)
    k = 0
    day = start
    while day <= stop:
        while k + 1 < len(knots) and knots[k + 1].date <= day:
            k += 1
        left = knots[k]
        if day <= left.date:
            out[day] = left.evi
        else:
            right = knots[k + 1]
            frac = (day - left.date).days / (right.date - left.date).days
            out[day] = left.evi + frac * (right.evi - left.evi)
        day += timedelta(days=1)
    return out


def fill_evi_seasonal(
    daily: dict[date, float],
    cutoff: date,
    history_years: set[int],
    end: date | None = None,
) -> dict[date, float]:
    """Replace values after ``cutoff`` with same-month-day historical means.

    Every post-cutoff day takes the mean value of its month-day across the
    given history years (read from the pre-cutoff part of the series).
    Feb 29 borrows the Feb 28 mean when no history year is a leap year.
    When ``end`` is given the series is also extended through that date,
    which is how a range that outruns the composites gets completed.
    """
    if not daily:
        raise ValidationError("empty daily vegetation series")
    if not history_years:
        raise ValidationError("no history years for seasonal fill")
    by_month_day: dict[tuple[int, int], list[float]] = {}
    for day, value in daily.items():
        if day <= cutoff and day.year in history_years:
            by_month_day.setdefault((day.month, day.day), []).append(value)

    days = sorted(daily)
    last = days[-1] if end is None else max(days[-1], end)
    out: dict[date, float] = {}
    day = days[0]
    while day <= last:
        if day <= cutoff:
            if day in daily:
                out[day] = daily[day]
        else:
            key = (day.month, day.day)
            if key not in by_month_day and key == (2, 29):
                key = (2, 28)
            if key not in by_month_day:
                raise ValidationError(
                    f"no history for month-day {day.month:02d}-{day.day:02d} needed on {day.isoformat()}"
                )
            values = by_month_day[key]
            out[day] = sum(values) / len(values)
        day += timedelta(days=1)
    return out


def daily_evi_series(records: list[RawEviRecord], start: date, end: date) -> dict[date, float]:
    """Daily vegetation index over a range: interpolation, then seasonal
    fill when the range outruns the last composite."""
    daily = interpolate_evi(records, start, end)
    last = max(daily)
    if last < end:
        history = {d.year for d in daily}
        log.info("vegetation composites end %s; seasonal fill through %s", last.isoformat(), end.isoformat())
        daily = fill_evi_seasonal(daily, last, history, end=end)
    return daily


def join_daily(
    weather: list[RawWeatherRecord],
    evi: dict[date, float],
    outages: list[RawOutageRecord],
    vegetation_causes=DEFAULT_VEGETATION_CAUSES,
) -> list[DailySample]:
    """Join complete weather, daily vegetation index, and outage labels.

    A day is labelled 1 when at least one outage record on that date has
    a cause in ``vegetation_causes``; several same-day outages still give
    a single positive day. Outages dated outside the weather range are
    dropped with a warning that reports the count.
    """
    if not weather:
        raise ValidationError("no weather records to join")
    days = [r.date for r in weather]
    for prev, cur in zip(days, days[1:]):
        if (cur - prev).days != 1:
            raise ValidationError(f"weather days are not contiguous between {prev.isoformat()} and {cur.isoformat()}")
    missing = [d for d in days if d not in evi]
    if missing:
        raise ValidationError(f"vegetation index missing for {missing[0].isoformat()} (+{len(missing) - 1} more days)")

    causes = set(vegetation_causes)
    in_range = set(days)
    positive_days: set[date] = set()
    dropped = 0
    for rec in outages:
        if rec.date not in in_range:
            dropped += 1
            continue
        if rec.cause in causes:
            positive_days.add(rec.date)
    if dropped:
        log.warning("dropped %d outage record(s) dated outside the weather range", dropped)

    samples: list[DailySample] = []
    for rec in weather:
        if None in (rec.tavg, rec.prcp, rec.wspd, rec.wdir):
            raise ValidationError(f"weather incomplete on {rec.date.isoformat()}; run impute_weather first")
        samples.append(
            DailySample(
                date=rec.date,
                tavg=rec.tavg,
                prcp=rec.prcp,
                wspd=rec.wspd,
                wdir=rec.wdir,
                evi=evi[rec.date],
                outage=1 if rec.date in positive_days else 0,
            )
        )
    return samples


def write_daily(samples: list[DailySample], path) -> None:
    """Persist joined daily samples as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(DAILY_COLUMNS)
        for s in samples:
            writer.writerow(
                [s.date.isoformat(), repr(s.tavg), repr(s.prcp), repr(s.wspd), repr(s.wdir), repr(s.evi), s.outage]
            )


def read_daily(path) -> list[DailySample]:
    """Read a daily-sample CSV produced by write_daily."""
    samples: list[DailySample] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(path, reader.fieldnames, DAILY_COLUMNS)
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["date"], path, line)
            values = {name: _parse_float(row[name], name, path, line) for name in ("tavg", "prcp", "wspd", "wdir", "evi")}
            outage = (row["outage"] or "").strip()
            if outage not in ("0", "1"):
                raise RowError(path, line, f"outage must be 0 or 1, got {outage!r}")
            samples.append(DailySample(date=day, outage=int(outage), **values))
    samples.sort(key=lambda s: s.date)
    return samples
