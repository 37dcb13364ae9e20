"""Figure rendering for the CLI report paths.

Every figure is written as SVG with a fixed hash salt and no date stamp,
so re-running a command reproduces the file byte for byte.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "transferplan",
    "font.size": 9,
    "axes.titlesize": 10,
    "figure.dpi": 100,
})

_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META, bbox_inches="tight")
    plt.close(fig)


def heatmap(values, row_labels, col_labels, path, title="", cbar_label="",
            cmap="RdBu_r", center=None, annotate=True, fmt="{:.2f}"):
    values = np.asarray(values, dtype=float)
    size = max(4.0, 0.45 * max(len(row_labels), len(col_labels)) + 2)
    fig, ax = plt.subplots(figsize=(size, size * len(row_labels) / max(len(col_labels), 1) + 0.8))
    kwargs = {}
    if center is not None:
        span = np.nanmax(np.abs(values - center)) or 1.0
        kwargs = {"vmin": center - span, "vmax": center + span}
    im = ax.imshow(values, cmap=cmap, aspect="auto", interpolation="nearest", **kwargs)
    fig.colorbar(im, ax=ax, label=cbar_label, shrink=0.8)
    ax.set_xticks(range(len(col_labels)))
    ax.set_xticklabels(col_labels, rotation=90)
    ax.set_yticks(range(len(row_labels)))
    ax.set_yticklabels(row_labels)
    if annotate and values.size <= 400:
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                if np.isfinite(values[i, j]):
                    ax.text(j, i, fmt.format(values[i, j]), ha="center", va="center", fontsize=6)
    if title:
        ax.set_title(title)
    _save(fig, path)


def delta_heatmap(report, path, method_names=None):
    """Delta table as a diverging heatmap centred on zero."""
    method_names = method_names or {}
    cols = [(s, m) for s in report.scales for m in report.methods]
    single = report.methods == ["delta"]
    col_labels = [s.upper() if single else f"{s.upper()}\n{method_names.get(m, m)}" for s, m in cols]
    vals = np.array([[report.cells.get((l, s, m), np.nan) for s, m in cols] for l in report.labels])
    heatmap(vals, report.labels, col_labels, path, title=report.task, cbar_label="F1 delta",
            cmap="RdYlGn", center=0.0, fmt="{:.1f}")


def weight_bars(fits, path):
    """Per-setting weight vectors as grouped bars, one group per component metric."""
    settings = list(fits)
    metrics = sorted({m for r in fits.values() for m in r.weights.components})
    fig, ax = plt.subplots(figsize=(max(5, 0.8 * len(metrics) * max(1, len(settings)) / 2), 3.5))
    width = 0.8 / max(1, len(settings))
    x = np.arange(len(metrics))
    for i, key in enumerate(settings):
        d = fits[key].weights.as_dict()
        ax.bar(x + i * width, [d.get(m, 0.0) for m in metrics], width, label="/".join(key))
    ax.set_xticks(x + width * (len(settings) - 1) / 2)
    ax.set_xticklabels(metrics, rotation=45, ha="right")
    ax.set_ylabel("weight")
    ax.legend(fontsize=7)
    _save(fig, path)


def correlation_bars(reports, path):
    """Mean predictive score of each metric, one bar per setting."""
    metrics = []
    for r in reports:
        if r.metric not in metrics:
            metrics.append(r.metric)
    settings = []
    for r in reports:
        if (r.task, r.scale) not in settings:
            settings.append((r.task, r.scale))
    table = {(r.metric, r.task, r.scale): r.mean for r in reports}
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(metrics) * max(1, len(settings)) / 2), 3.5))
    width = 0.8 / max(1, len(settings))
    x = np.arange(len(metrics))
    for i, (task, scale) in enumerate(settings):
        vals = [table.get((m, task, scale), np.nan) for m in metrics]
        ax.bar(x + i * width, np.nan_to_num(vals), width, label=f"{task}/{scale}")
    ax.set_xticks(x + width * (len(settings) - 1) / 2)
    ax.set_xticklabels(metrics, rotation=60, ha="right")
    ax.set_ylabel("mean predictive score")
    ax.axhline(0, color="black", linewidth=0.5)
    ax.legend(fontsize=7)
    _save(fig, path)


def loss_curves(results, path):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    for r in results:
        axes[0].plot(r.task_loss, label=f"{r.mode} s{r.seed}", linewidth=0.8)
        axes[1].plot(r.adv_loss, label=f"{r.mode} s{r.seed}", linewidth=0.8)
    axes[0].set_title("task loss")
    axes[1].set_title("adversarial loss")
    for ax in axes:
        ax.set_xlabel("epoch")
    axes[0].legend(fontsize=6)
    _save(fig, path)
