"""Figure rendering for the CLI report path (PNG files next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import HeatmapCell
from .features import GroupedRateReport
from .model import CoefficientReport


def plot_grouped_rates(report: GroupedRateReport, path, title: str, xlabel: str) -> None:
    labels = [g.group for g in report.groups]
    rates = [g.rate if g.rate is not None else 0.0 for g in report.groups]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    bars = ax.bar(labels, rates, color="#4878a8")
    for bar, group in zip(bars, report.groups):
        note = f"n={group.total}" if group.rate is not None else "empty"
        ax.annotate(note, (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("outage rate")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _cell_grid(cells: list[HeatmapCell], wind_labels, evi_labels, attr: str) -> np.ndarray:
    values = {(c.wind_bin, c.evi_bin): getattr(c, attr) for c in cells}
    grid = np.full((len(evi_labels), len(wind_labels)), np.nan)
    for i, evi_label in enumerate(evi_labels):
        for j, wind_label in enumerate(wind_labels):
            v = values.get((wind_label, evi_label))
            if v is not None:
                grid[i, j] = v
    return grid


def plot_heatmap(cells: list[HeatmapCell], wind_labels, evi_labels, path) -> None:
    actual = _cell_grid(cells, wind_labels, evi_labels, "actual_rate")
    predicted = _cell_grid(cells, wind_labels, evi_labels, "predicted_rate")
    vmax = np.nanmax([np.nanmax(actual, initial=0.0), np.nanmax(predicted, initial=0.0), 1e-9])
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharey=True)
    for ax, grid, title in ((axes[0], actual, "actual outage rate"), (axes[1], predicted, "predicted outage rate")):
        masked = np.ma.masked_invalid(grid)
        image = ax.imshow(masked, origin="lower", aspect="auto", cmap="YlOrRd", vmin=0.0, vmax=vmax)
        ax.set_xticks(range(len(wind_labels)), wind_labels, rotation=45, ha="right")
        ax.set_yticks(range(len(evi_labels)), evi_labels)
        ax.set_xlabel("wind speed bin (m/s)")
        ax.set_title(title)
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                if not np.isnan(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", fontsize=7)
        fig.colorbar(image, ax=ax, fraction=0.046)
    axes[0].set_ylabel("vegetation index bin")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_coefficients(report: CoefficientReport, path) -> None:
    names = [row.feature for row in report.rows][::-1]
    values = [row.coefficient for row in report.rows][::-1]
    colors = ["#b04a4a" if v < 0 else "#4878a8" for v in values]
    fig, ax = plt.subplots(figsize=(6.4, 0.35 * max(len(names), 6) + 1.2))
    ax.barh(names, values, color=colors)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("coefficient (standardised features)")
    ax.set_title("feature importance by |coefficient|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
