"""Report figures rendered alongside the delimited outputs.

All plots go straight to PNG files through the Agg backend; nothing here
opens a window. Figures are a convenience view of the CSV/JSON outputs and
carry no information of their own.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sdr import BasisEstimate, DimensionSelection  # noqa: E402
from .simlab import MonteCarloReport  # noqa: E402

__all__ = [
    "simulation_figure",
    "directions_figure",
    "selection_figure",
    "prediction_figure",
]

_DPI = 150


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def simulation_figure(report: MonteCarloReport, path: str | Path) -> Path:
    """Histogram of per-replicate errors with the mean marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(report.errors, bins=min(30, max(5, len(report.errors) // 4)),
            color="#4878a8", edgecolor="white")
    ax.axvline(report.mean, color="#c44e52", lw=2,
               label=f"mean = {report.mean:.3f}")
    ax.set_xlabel("subspace estimation error")
    ax.set_ylabel("replicates")
    ax.set_title(
        f"model {report.model_id}, n={report.n}, {report.design} "
        f"({len(report.errors)} replicates)"
    )
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def directions_figure(basis: BasisEstimate, path: str | Path) -> Path:
    """Fitted direction functions over the grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    t = basis.eigensystem.grid.points
    for k, curve in enumerate(basis.directions, start=1):
        ax.plot(t, curve.values, lw=1.8, label=f"direction {k}")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("direction value")
    ax.set_title("estimated direction functions")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def selection_figure(selection: DimensionSelection, path: str | Path) -> Path:
    """Bootstrap variability against candidate dimension."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(selection.candidate_ks, selection.variability, "o-", color="#4878a8")
    ax.axvline(selection.chosen_k, color="#c44e52", lw=1.5, ls="--",
               label=f"chosen k = {selection.chosen_k}")
    ax.set_xlabel("candidate dimension k")
    ax.set_ylabel("mean bootstrap subspace distance")
    ax.set_xticks(selection.candidate_ks)
    ax.set_title(f"dimension selection ({selection.n_boot} bootstrap replicates)")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def prediction_figure(
    observed: np.ndarray, predicted: np.ndarray, path: str | Path
) -> Path:
    """Predicted versus observed responses with the identity line."""
    fig, ax = plt.subplots(figsize=(5, 5))
    lo = min(np.min(observed), np.min(predicted))
    hi = max(np.max(observed), np.max(predicted))
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="0.6", lw=1)
    ax.scatter(observed, predicted, s=18, color="#4878a8", alpha=0.8)
    ax.set_xlabel("observed response")
    ax.set_ylabel("predicted response")
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_title("prediction on the test sample")
    fig.tight_layout()
    return _save(fig, path)
