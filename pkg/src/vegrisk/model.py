"""Logistic risk model: outage log-odds linear in the engineered features.

Fitting is full-batch gradient descent on the mean binary cross-entropy
(optionally L2-penalised, intercept excluded), from zero initialisation.
The problem is convex, so the fixed-step descent is deterministic and
initialisation only affects iteration count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ValidationError
from .features import FeatureTable, ScalingParams, apply_scaling


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_iters: int = 20000
    tolerance: float = 1e-8  # stop when the loss improves by less than this
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tolerance <= 0:
            raise ValidationError(f"tolerance must be > 0, got {self.tolerance}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be >= 0, got {self.l2}")


@dataclass
class LogisticModel:
    """Fitted intercept and named coefficients, plus the scaling they expect.

    A model carrying ScalingParams is a unit that consumes RAW feature
    values and standardises them itself; predictions are then invariant
    to the units of the raw data.
    """

    alpha: float
    coefficients: dict[str, float]
    scaling: ScalingParams | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValidationError("intercept must be finite")
        for name, b in self.coefficients.items():
            if not math.isfinite(b):
                raise ValidationError(f"coefficient for {name!r} must be finite")

    @property
    def feature_names(self) -> list[str]:
        return list(self.coefficients)

    def beta_vector(self, feature_names) -> np.ndarray:
        """Coefficients aligned to the given feature order."""
        missing = [n for n in feature_names if n not in self.coefficients]
        extra = [n for n in self.coefficients if n not in feature_names]
        if missing or extra:
            raise ValidationError(
                f"feature mismatch: table lacks {extra or 'nothing'}, model lacks {missing or 'nothing'}"
            )
        return np.array([self.coefficients[n] for n in feature_names])


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (finite for |z| up to ~700)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z) in log-sum-exp form, overflow-free
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def loss_and_gradient(
    alpha: float, beta: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, float, np.ndarray]:
    """Mean binary cross-entropy plus optional L2, and its exact gradient.

    Returns (loss, d_loss/d_alpha, d_loss/d_beta). The penalty is
    l2/(2n) * ||beta||^2; the intercept is never penalised.
    """
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    z = alpha + X @ beta
    loss = float(np.mean(_softplus(z) - y * z))
    residual = sigmoid(z) - y
    d_alpha = float(residual.mean())
    d_beta = X.T @ residual / n
    if l2:
        loss += l2 / (2.0 * n) * float(beta @ beta)
        d_beta = d_beta + (l2 / n) * beta
    return loss, d_alpha, d_beta


def model_loss_and_gradient(model: LogisticModel, table: FeatureTable, l2: float = 0.0) -> tuple[float, dict[str, float]]:
    """Loss and per-parameter gradient of a model on an aligned table."""
    beta = model.beta_vector(table.feature_names)
    loss, d_alpha, d_beta = loss_and_gradient(model.alpha, beta, table.rows, table.labels, l2)
    gradient = {"alpha": d_alpha}
    gradient.update(zip(table.feature_names, (float(g) for g in d_beta)))
    return loss, gradient


def fit(table: FeatureTable, config: TrainConfig = TrainConfig(), scaling: ScalingParams | None = None) -> LogisticModel:
    """Gradient-descent fit from zero initialisation.

    Stops when the loss improves by less than ``tolerance`` or the
    iteration cap is reached. A loss that becomes non-finite, or ends
    above its starting value, aborts with advice to lower the learning
    rate. ``scaling`` is stored on the model so it can consume raw rows.
    """
    if len(table) < 2:
        raise ValidationError("need at least 2 rows to fit")
    y = table.labels
    if y.min() == y.max():
        raise ValidationError("training labels are all identical; both classes are required")
    X = table.rows

    alpha = 0.0
    beta = np.zeros(X.shape[1])
    loss, d_alpha, d_beta = loss_and_gradient(alpha, beta, X, y, config.l2)
    initial_loss = loss
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iters + 1):
        alpha -= config.learning_rate * d_alpha
        beta -= config.learning_rate * d_beta
        new_loss, d_alpha, d_beta = loss_and_gradient(alpha, beta, X, y, config.l2)
        if not math.isfinite(new_loss):
            raise DivergenceError("training loss became non-finite; reduce learning_rate")
        if abs(loss - new_loss) < config.tolerance:
            loss = new_loss
            converged = True
            break
        loss = new_loss
    if loss > initial_loss:
        raise DivergenceError(
            f"final loss {loss:.6g} exceeds initial loss {initial_loss:.6g}; reduce learning_rate"
        )
    metadata = {
        "seed": config.seed,
        "iterations": iterations,
        "converged": converged,
        "initial_loss": initial_loss,
        "final_loss": loss,
        "learning_rate": config.learning_rate,
        "tolerance": config.tolerance,
        "l2": config.l2,
        "train_rows": len(table),
    }
    coefficients = {name: float(b) for name, b in zip(table.feature_names, beta)}
    return LogisticModel(float(alpha), coefficients, scaling, metadata)


def predict_proba(model: LogisticModel, table: FeatureTable) -> np.ndarray:
    """Outage probability per row.

    A model carrying scaling parameters treats ``table`` as raw feature
    values and standardises them itself; without scaling, rows are used
    as-is. Do not pass pre-scaled rows to a scaling-carrying model.
    """
    t = apply_scaling(table, model.scaling) if model.scaling is not None else table
    beta = model.beta_vector(t.feature_names)
    return sigmoid(model.alpha + t.rows @ beta)


def predict_label(model: LogisticModel, table: FeatureTable, threshold: float = 0.5) -> np.ndarray:
    """1 where the predicted probability reaches the threshold (ties count in)."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    return (predict_proba(model, table) >= threshold).astype(int)


@dataclass(frozen=True)
class CoefficientRow:
    feature: str
    coefficient: float
    abs_coefficient: float


@dataclass(frozen=True)
class CoefficientReport:
    """Coefficients ranked by magnitude (ties alphabetical); intercept unranked."""

    rows: tuple[CoefficientRow, ...]
    intercept: float


def coefficient_report(model: LogisticModel) -> CoefficientReport:
    rows = sorted(
        (CoefficientRow(name, b, abs(b)) for name, b in model.coefficients.items()),
        key=lambda r: (-r.abs_coefficient, r.feature),
    )
    return CoefficientReport(tuple(rows), model.alpha)


def model_to_dict(model: LogisticModel) -> dict:
    scaling = None
    if model.scaling is not None:
        scaling = {name: {"mu": model.scaling.mean[name], "sigma": model.scaling.std[name]} for name in model.scaling.features}
    return {
        "alpha": model.alpha,
        "coefficients": dict(model.coefficients),
        "scaling": scaling,
        "metadata": dict(model.metadata),
    }


def model_from_dict(data: dict) -> LogisticModel:
    try:
        alpha = data["alpha"]
        coefficients = data["coefficients"]
    except KeyError as exc:
        raise ValidationError(f"model document missing key {exc}") from None
    scaling = None
    if data.get("scaling") is not None:
        scaling = ScalingParams(
            {name: entry["mu"] for name, entry in data["scaling"].items()},
            {name: entry["sigma"] for name, entry in data["scaling"].items()},
        )
    return LogisticModel(float(alpha), {n: float(b) for n, b in coefficients.items()}, scaling, dict(data.get("metadata", {})))


def save_model(model: LogisticModel, path) -> None:
    """Persist as JSON; floats round-trip exactly (read(write(m)) == m)."""
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> LogisticModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    return model_from_dict(data)
