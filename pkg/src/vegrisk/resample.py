"""Training-set rebalancing: synthetic minority oversampling followed by
edited-nearest-neighbour cleaning of the majority class.

Both stages use exact brute-force Euclidean neighbour search (fine at a
few thousand rows); distance ties resolve to the lower row index so the
whole procedure is deterministic under a fixed seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import FeatureTable
from .rng import stage_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResampleConfig:
    smote_k: int = 5
    enn_k: int = 3
    target_ratio: float = 1.0  # minority/majority ratio after oversampling
    seed: int = 0
    enn_both_classes: bool = False
    enabled: bool = True

    def __post_init__(self):
        if self.smote_k < 1:
            raise ValidationError(f"smote_k must be >= 1, got {self.smote_k}")
        if self.enn_k < 1 or self.enn_k % 2 == 0:
            raise ValidationError(f"enn_k must be odd and >= 1, got {self.enn_k}")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValidationError(f"target_ratio must lie in (0, 1], got {self.target_ratio}")


def nearest_neighbor_indices(points: np.ndarray, k: int, chunk: int = 64) -> np.ndarray:
    """Indices of the k nearest points to each point, self excluded.

    Exact search on squared Euclidean distance, computed from explicit
    differences (not the expanded dot-product form) so duplicate points
    tie at exactly zero; stable argsort then breaks ties by lower index.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n - 1:
        raise ValidationError(f"k must lie in [1, {n - 1}], got {k}")
    out = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        d2 = np.zeros((stop - start, n))
        for j in range(points.shape[1]):
            diff = block[:, j, None] - points[None, :, j]
            d2 += diff * diff
        d2[np.arange(stop - start), np.arange(start, stop)] = -np.inf  # self sorts first
        order = np.argsort(d2, axis=1, kind="stable")
        out[start:stop] = order[:, 1 : k + 1]
    return out


def smote(table: FeatureTable, config: ResampleConfig) -> FeatureTable:
    """Oversample the minority class with synthetic on-segment rows.

    Each synthetic row is a + u * (b - a) for a random minority row a,
    a random one b of its smote_k nearest minority neighbours, and
    u ~ Uniform(0, 1). Original rows are preserved verbatim; synthetic
    rows carry the minority label, the date of their base row, and a
    True synthetic marker.
    """
    labels = table.labels
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    minority_label = 1 if n_pos <= n_neg else 0
    n_min, n_maj = (n_pos, n_neg) if minority_label == 1 else (n_neg, n_pos)
    if n_min < 2:
        raise ValidationError(f"minority class has {n_min} row(s); need at least 2 for smote")
    n_synthetic = max(0, math.ceil(config.target_ratio * n_maj) - n_min)
    if n_synthetic == 0:
        return table.copy()
    k = config.smote_k
    if k > n_min - 1:
        log.warning("smote_k=%d exceeds minority size %d; clamped to %d", k, n_min, n_min - 1)
        k = n_min - 1

    minority_idx = np.flatnonzero(labels == minority_label)
    pts = table.rows[minority_idx]
    neighbors = nearest_neighbor_indices(pts, k)

    rng = stage_rng(config.seed, "resample.smote")
    base = rng.integers(0, n_min, size=n_synthetic)
    pick = rng.integers(0, k, size=n_synthetic)
    u = rng.random(n_synthetic)
    a = pts[base]
    b = pts[neighbors[base, pick]]
    new_rows = a + u[:, None] * (b - a)

    marker = np.zeros(len(table), dtype=bool) if table.synthetic is None else table.synthetic.copy()
    return FeatureTable(
        list(table.feature_names),
        np.vstack([table.rows, new_rows]),
        np.concatenate([labels, np.full(n_synthetic, minority_label, dtype=int)]),
        list(table.dates) + [table.dates[minority_idx[i]] for i in base],
        np.concatenate([marker, np.ones(n_synthetic, dtype=bool)]),
    )


def enn(table: FeatureTable, config: ResampleConfig) -> FeatureTable:
    """Drop rows whose neighbourhood vote contradicts their label.

    Only majority-class rows are editable unless ``enn_both_classes`` is
    set. Votes use the enn_k nearest neighbours (self excluded) in the
    original table; k is odd, so binary votes never tie. When the two
    classes are exactly balanced, the conventional negative class (0)
    counts as the majority.
    """
    n = len(table)
    if n < config.enn_k + 1:
        raise ValidationError(f"need at least enn_k+1={config.enn_k + 1} rows, got {n}")
    labels = table.labels
    if labels.min() == labels.max():
        return table.copy()
    n_pos = int(labels.sum())
    majority_label = 1 if n_pos > n - n_pos else 0

    neighbors = nearest_neighbor_indices(table.rows, config.enn_k)
    votes = labels[neighbors].sum(axis=1)
    voted = (2 * votes > config.enn_k).astype(int)
    disagree = voted != labels
    editable = np.ones(n, dtype=bool) if config.enn_both_classes else labels == majority_label
    keep = ~(disagree & editable)
    return table.subset(keep)


def smoteenn(table: FeatureTable, config: ResampleConfig) -> FeatureTable:
    """SMOTE then ENN; returns the augmented, cleaned table."""
    before = _positive_fraction(table)
    out = enn(smote(table, config), config)
    log.info(
        "smoteenn: %d rows (%.1f%% positive) -> %d rows (%.1f%% positive)",
        len(table), 100 * before, len(out), 100 * _positive_fraction(out),
    )
    return out


def _positive_fraction(table: FeatureTable) -> float:
    return float(table.labels.mean()) if len(table) else 0.0
