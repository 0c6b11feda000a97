"""Report figures rendered to files (PNG) next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fields import MultiField
from .operators import DataSet, Response

__all__ = ["plot_data", "plot_components", "plot_mixture", "plot_convergence"]


def _axes_grid(n_rows, figsize):
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(n_rows, 1, figsize=figsize, sharex=True, squeeze=False)
    return fig, axes[:, 0]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_data(data: DataSet, response: Optional[Response], path) -> Path:
    """One panel per channel; masked stretches are shaded."""
    x = data.grid.positions[0]
    n = data.n_channels
    fig, axes = _axes_grid(n, (8, 1.4 * n + 1))
    for i, ax in enumerate(axes):
        ax.plot(x, data.values[i], lw=0.6, color="C0")
        if response is not None:
            missing = response.mask[i] == 0
            if missing.any():
                ax.fill_between(
                    x, 0, 1, where=missing, transform=ax.get_xaxis_transform(),
                    color="0.85", zorder=0,
                )
        ax.set_ylabel(f"ch {i}")
    axes[-1].set_xlabel("x")
    fig.suptitle("data channels")
    return _save(fig, path)


def plot_components(
    mean: MultiField,
    truth: Optional[MultiField],
    std: Optional[MultiField],
    path,
) -> Path:
    """Reconstruction per component with an optional one-sigma band and truth."""
    x = mean.grid.positions[0]
    c = mean.n_components
    fig, axes = _axes_grid(c, (8, 2.0 * c + 1))
    for j, ax in enumerate(axes):
        if std is not None:
            ax.fill_between(
                x,
                mean.values[j] - std.values[j],
                mean.values[j] + std.values[j],
                alpha=0.3,
                color="C1",
                label="one sigma",
            )
        ax.plot(x, mean.values[j], color="C1", lw=0.9, label="reconstruction")
        if truth is not None:
            ax.plot(x, truth.values[j], color="k", lw=0.7, ls="--", label="truth")
        ax.set_ylabel(f"component {j}")
        if j == 0:
            ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("x")
    fig.suptitle("component reconstruction")
    return _save(fig, path)


def plot_mixture(estimate: np.ndarray, truth: Optional[np.ndarray], path) -> Path:
    """Grouped bars of mixture entries, channels along the x axis."""
    import matplotlib.pyplot as plt

    estimate = np.asarray(estimate)
    n_channels, n_comp = estimate.shape
    fig, ax = plt.subplots(figsize=(7, 3.2))
    xs = np.arange(n_channels)
    width = 0.8 / (n_comp * (2 if truth is not None else 1))
    for j in range(n_comp):
        offset = (j - n_comp / 2) * width * (2 if truth is not None else 1)
        ax.bar(xs + offset, estimate[:, j], width, label=f"estimate {j}", color=f"C{j}")
        if truth is not None:
            ax.bar(
                xs + offset + width,
                np.asarray(truth)[:, j],
                width,
                label=f"truth {j}",
                color=f"C{j}",
                alpha=0.45,
                hatch="//",
            )
    ax.set_xticks(xs)
    ax.set_xlabel("channel")
    ax.set_ylabel("mixture weight")
    ax.legend(fontsize=8, ncol=2)
    ax.set_title("mixture matrix")
    return _save(fig, path)


def plot_convergence(
    curves: Sequence[tuple[str, np.ndarray]],
    floors: Sequence[tuple[str, float]],
    path,
) -> Path:
    """Deviation traces on a log axis with horizontal uncertainty floors."""
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, values in curves:
        values = np.asarray(values, dtype=float)
        ax.semilogy(np.arange(1, values.size + 1), values, label=label)
    for label, level in floors:
        ax.axhline(level, ls=":", color="0.4")
        ax.annotate(label, (1.02, level), xycoords=("axes fraction", "data"), fontsize=8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("rms deviation")
    ax.legend(fontsize=8)
    ax.set_title("convergence")
    return _save(fig, path)
