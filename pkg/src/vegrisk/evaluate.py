"""Hold-out evaluation.

Chronological splitting, confusion-matrix metrics, ranking quality
(probability a positive outranks a negative), observed-vs-predicted rate
heatmaps over raw wind/vegetation bins, and the tolerance match rate
between the two rates per cell.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import SchemaError, ValidationError
from .features import BinSpec, FeatureTable
from .ingest import _parse_date, _parse_float
from .model import CoefficientReport, LogisticModel, coefficient_report, predict_proba


@dataclass(frozen=True)
class SplitResult:
    train: FeatureTable
    test: FeatureTable
    split_date: date  # first test date


def temporal_split(table: FeatureTable, train_fraction: float = 0.8) -> SplitResult:
    """First ceil(fraction * n) rows by date to train, the rest to test.

    No shuffling; rows must already be in date order so training never
    sees information from after the boundary.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if len(table) < 2:
        raise ValidationError("need at least 2 rows to split")
    dates = table.dates
    if any(b < a for a, b in zip(dates, dates[1:])):
        raise ValidationError("rows must be sorted by date before splitting")
    n_train = math.ceil(train_fraction * len(table))
    if n_train >= len(table):
        raise ValidationError(f"train_fraction {train_fraction} leaves an empty test split")
    train = table.subset(slice(0, n_train))
    test = table.subset(slice(n_train, len(table)))
    if train.dates[-1] >= test.dates[0]:
        raise ValidationError("train/test boundary is ambiguous: duplicate date across the split")
    return SplitResult(train, test, test.dates[0])


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def classification_metrics(
    labels, scores, threshold: float = 0.5
) -> tuple[ConfusionCounts, float | None, float | None, float | None]:
    """Confusion counts plus precision/recall/F1 at the given threshold.

    Scores at or above the threshold classify as positive. Metrics with a
    zero denominator come back as None, never as a silent 0.
    """
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValidationError("labels and scores length mismatch")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    preds = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(preds & pos))
    fp = int(np.sum(preds & ~pos))
    fn = int(np.sum(~preds & pos))
    tn = int(np.sum(~preds & ~pos))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return ConfusionCounts(tp, fp, tn, fn), precision, recall, f1


def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ordered = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and ordered[j + 1] == ordered[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # 1-based midrank
        i = j + 1
    return ranks


def roc_auc(labels, scores) -> float | None:
    """Probability that a positive outscores a negative, ties counted half.

    Computed from midranks after a single sort; algebraically identical
    to counting every positive/negative pair. None when only one class
    is present.
    """
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValidationError("labels and scores length mismatch")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class HeatmapCell:
    wind_bin: str
    evi_bin: str
    count: int
    actual_rate: float | None  # None marks an empty cell
    predicted_rate: float | None


def equal_width_bins(values, n_bins: int) -> BinSpec:
    """n equal-width bins spanning the observed range (the last is open)."""
    if n_bins < 1:
        raise ValidationError(f"need at least 1 bin, got {n_bins}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("no values to bin")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return BinSpec((lo,))
    width = (hi - lo) / n_bins
    return BinSpec(tuple(lo + i * width for i in range(n_bins)))


def heatmap_from_scores(table: FeatureTable, scores, wind_bins: BinSpec, evi_bins: BinSpec) -> list[HeatmapCell]:
    """Observed vs mean-score outage rate per (wind, vegetation) cell.

    Cells partition the rows on RAW wind speed and vegetation index (the
    table must hold unscaled values). Empty cells are kept with None
    rates so that "no data" stays distinct from "rate 0".
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(table),):
        raise ValidationError("scores length must equal table row count")
    wind_idx = np.array([wind_bins.index_of(v) for v in table.column("wspd")])
    evi_idx = np.array([evi_bins.index_of(v) for v in table.column("evi")])
    labels = table.labels
    cells: list[HeatmapCell] = []
    for wi, wind_label in enumerate(wind_bins.labels):
        for ei, evi_label in enumerate(evi_bins.labels):
            mask = (wind_idx == wi) & (evi_idx == ei)
            n = int(mask.sum())
            cells.append(
                HeatmapCell(
                    wind_label,
                    evi_label,
                    n,
                    float(labels[mask].mean()) if n else None,
                    float(scores[mask].mean()) if n else None,
                )
            )
    return cells


def heatmap_rates(test: FeatureTable, model: LogisticModel, wind_bins: BinSpec, evi_bins: BinSpec) -> list[HeatmapCell]:
    """Heatmap cells with predicted rates from the model's probabilities."""
    return heatmap_from_scores(test, predict_proba(model, test), wind_bins, evi_bins)


def match_rate(cells: list[HeatmapCell], tolerance: float = 0.05, min_count: int = 1) -> float:
    """Fraction of qualifying cells with |predicted - actual| <= tolerance.

    Qualifying cells have at least ``min_count`` members (and always at
    least one); an all-empty heatmap is an error, not a rate.
    """
    if tolerance < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    qualifying = [c for c in cells if c.count >= max(1, min_count)]
    if not qualifying:
        raise ValidationError("no heatmap cells meet the member-count floor")
    hits = sum(1 for c in qualifying if abs(c.predicted_rate - c.actual_rate) <= tolerance)
    return hits / len(qualifying)


def sample_match_rate(labels, scores, tolerance: float = 0.05) -> float:
    """Per-sample variant: fraction of rows with |score - label| <= tolerance."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValidationError("labels and scores length mismatch")
    if labels.size == 0:
        raise ValidationError("no samples")
    return float(np.mean(np.abs(scores - labels) <= tolerance))


@dataclass
class EvaluationReport:
    confusion: ConfusionCounts
    precision: float | None
    recall: float | None
    f1: float | None
    roc_auc: float | None
    cells: list[HeatmapCell]
    match_rate: float
    match_rate_per_sample: float
    threshold: float
    match_tolerance: float
    min_cell_count: int
    test_rows: int
    test_positives: int
    coefficients: CoefficientReport | None = None


def evaluate_scores(
    test: FeatureTable,
    scores,
    wind_bins: BinSpec,
    evi_bins: BinSpec | None = None,
    threshold: float = 0.5,
    tolerance: float = 0.05,
    min_cell_count: int = 1,
    evi_bin_count: int = 4,
) -> EvaluationReport:
    """Full report from externally supplied scores (one per test row)."""
    if len(test) == 0:
        raise ValidationError("empty test table")
    scores = np.asarray(scores, dtype=float)
    if evi_bins is None:
        evi_bins = equal_width_bins(test.column("evi"), evi_bin_count)
    confusion, precision, recall, f1 = classification_metrics(test.labels, scores, threshold)
    cells = heatmap_from_scores(test, scores, wind_bins, evi_bins)
    if sum(c.count for c in cells) != len(test):
        raise ValidationError("heatmap cells do not partition the test set")
    return EvaluationReport(
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        roc_auc=roc_auc(test.labels, scores),
        cells=cells,
        match_rate=match_rate(cells, tolerance, min_cell_count),
        match_rate_per_sample=sample_match_rate(test.labels, scores, tolerance),
        threshold=threshold,
        match_tolerance=tolerance,
        min_cell_count=min_cell_count,
        test_rows=len(test),
        test_positives=int(test.labels.sum()),
    )


def evaluate_model(
    test: FeatureTable,
    model: LogisticModel,
    wind_bins: BinSpec,
    evi_bins: BinSpec | None = None,
    threshold: float = 0.5,
    tolerance: float = 0.05,
    min_cell_count: int = 1,
    evi_bin_count: int = 4,
) -> EvaluationReport:
    """Full report for a fitted model on the raw (unscaled) test table."""
    scores = predict_proba(model, test)
    report = evaluate_scores(test, scores, wind_bins, evi_bins, threshold, tolerance, min_cell_count, evi_bin_count)
    report.coefficients = coefficient_report(model)
    return report


def report_to_dict(report: EvaluationReport) -> dict:
    coefficients = None
    if report.coefficients is not None:
        coefficients = {
            "intercept": report.coefficients.intercept,
            "ranked": [
                {"feature": r.feature, "coefficient": r.coefficient, "abs_coefficient": r.abs_coefficient}
                for r in report.coefficients.rows
            ],
        }
    return {
        "threshold": report.threshold,
        "match_tolerance": report.match_tolerance,
        "min_cell_count": report.min_cell_count,
        "test_rows": report.test_rows,
        "test_positives": report.test_positives,
        "confusion": {"tp": report.confusion.tp, "fp": report.confusion.fp, "tn": report.confusion.tn, "fn": report.confusion.fn},
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "roc_auc": report.roc_auc,
        "match_rate": report.match_rate,
        "match_rate_per_sample": report.match_rate_per_sample,
        "heatmap": [
            {
                "wind_bin": c.wind_bin,
                "evi_bin": c.evi_bin,
                "count": c.count,
                "actual_rate": c.actual_rate,
                "predicted_rate": c.predicted_rate,
            }
            for c in report.cells
        ],
        "coefficients": coefficients,
    }


def write_report_json(report: EvaluationReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")


def _metric_cell(value: float | None) -> str:
    return "" if value is None else repr(value)


def write_metrics_csv(report: EvaluationReport, path) -> None:
    rows = [
        ("tp", report.confusion.tp),
        ("fp", report.confusion.fp),
        ("tn", report.confusion.tn),
        ("fn", report.confusion.fn),
        ("precision", _metric_cell(report.precision)),
        ("recall", _metric_cell(report.recall)),
        ("f1", _metric_cell(report.f1)),
        ("roc_auc", _metric_cell(report.roc_auc)),
        ("match_rate", repr(report.match_rate)),
        ("match_rate_per_sample", repr(report.match_rate_per_sample)),
        ("threshold", repr(report.threshold)),
        ("match_tolerance", repr(report.match_tolerance)),
        ("min_cell_count", report.min_cell_count),
        ("test_rows", report.test_rows),
        ("test_positives", report.test_positives),
    ]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("metric", "value"))
        writer.writerows(rows)


def write_heatmap_csv(cells: list[HeatmapCell], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("wind_bin", "evi_bin", "count", "actual_rate", "predicted_rate"))
        for c in cells:
            writer.writerow((c.wind_bin, c.evi_bin, c.count, _metric_cell(c.actual_rate), _metric_cell(c.predicted_rate)))


def write_coefficients_csv(report: CoefficientReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("feature", "coefficient", "abs_coefficient"))
        for row in report.rows:
            writer.writerow((row.feature, repr(row.coefficient), repr(row.abs_coefficient)))
        writer.writerow(("intercept", repr(report.intercept), ""))


def read_predictions_csv(path) -> dict[date, float]:
    """Read an external predictions CSV with columns date,score."""
    scores: dict[date, float] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        if "date" not in header or "score" not in header:
            raise SchemaError(f"{path}: missing required column(s): date, score")
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["date"], path, line)
            scores[day] = _parse_float(row["score"], "score", path, line)
    if not scores:
        raise ValidationError(f"{path}: no prediction rows")
    return scores
