"""Figures for ``--report-dir``.

Figures are built on :class:`matplotlib.figure.Figure` with the Agg canvas,
so nothing touches pyplot's global state and rendering works headless.
"""

import os

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {"dpi": 120, "figsize": (6.0, 3.8)}


def new_figure(nrows=1, ncols=1, figsize=None):
    fig = Figure(figsize=figsize or RC["figsize"], dpi=RC["dpi"], layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def save(fig, directory, stem):
    """Write ``<directory>/<stem>.png`` and return the path."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{stem}.png")
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    return path


def _positive(values, floor=1e-18):
    return np.maximum(np.abs(np.asarray(values, dtype=float)), floor)


def lambda_table(names, lambdas, residuals, tol):
    """Umbilic factor per sample point, with the fit residuals on a log axis."""
    fig, ax = new_figure(1, 2, figsize=(9.0, 3.8))
    x = np.arange(len(names))
    ax[0, 0].plot(x, lambdas, "o-", color="C0")
    ax[0, 0].set_xticks(x, names, rotation=45, ha="right")
    ax[0, 0].set_ylabel("lambda")
    ax[0, 0].axhline(0.0, color="0.6", lw=0.8)
    ax[0, 0].set_title("umbilic factor")
    ax[0, 1].bar(x, _positive(residuals), color="C1")
    ax[0, 1].axhline(tol, color="C3", ls="--", label=f"tol {tol:g}")
    ax[0, 1].set_yscale("log")
    ax[0, 1].set_xticks(x, names, rotation=45, ha="right")
    ax[0, 1].set_title("fit residual")
    ax[0, 1].legend(loc="best", fontsize=8)
    return fig


def residual_bars(groups, tols, title=""):
    """Grouped log-scale bars: ``groups`` maps a label to ``{point: value}``."""
    labels = list(groups)
    names = sorted({n for g in groups.values() for n in g})
    fig, axes = new_figure()
    ax = axes[0, 0]
    x = np.arange(len(names))
    width = 0.8 / max(len(labels), 1)
    for i, lab in enumerate(labels):
        vals = [groups[lab].get(n, np.nan) for n in names]
        ax.bar(x + (i - (len(labels) - 1) / 2) * width, _positive(vals), width,
               label=lab, color=f"C{i}")
        if lab in tols:
            ax.axhline(tols[lab], color=f"C{i}", ls="--", lw=0.9)
    ax.set_yscale("log")
    ax.set_xticks(x, names, rotation=45, ha="right")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return fig


def holonomy_matrices(elements):
    """Heat map of each holonomy element; the colour scale is shared."""
    n = len(elements)
    fig, axes = new_figure(1, max(n, 1), figsize=(2.6 * max(n, 1) + 1.0, 3.0))
    if n == 0:
        return fig
    mats = [np.asarray(e.matrix, dtype=float) for e in elements]
    vmax = max(float(np.max(np.abs(m))) for m in mats) or 1.0
    im = None
    for ax, e, m in zip(axes[0], elements, mats):
        im = ax.imshow(m, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.set_title(e.loop_id, fontsize=9)
        ax.set_xticks(range(m.shape[1]))
        ax.set_yticks(range(m.shape[0]))
        for (i, j), v in np.ndenumerate(m):
            ax.text(j, i, f"{v:.3g}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=list(axes[0]), shrink=0.8)
    return fig


def scalar_profile(names, values, ylabel, title=""):
    """One scalar per named point, e.g. the conformal factor of a reconstruction."""
    fig, axes = new_figure()
    ax = axes[0, 0]
    x = np.arange(len(names))
    ax.plot(x, values, "s-", color="C2")
    ax.set_xticks(x, names, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return fig
