"""
Optional PNG figures rendered next to the CSV outputs.

The CSV files are the record; the figures are a convenience for eyeballing
a sweep or a convergence run.
"""

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_AXIS_LABELS = {
    "L": "number of layers L",
    "N": "meta-atoms per layer N",
    "b": "phase resolution b (bits)",
    "K": "number of users K",
    "P_T": "transmit power P_T (dBm)",
}


def figure_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def plot_sweep(rows, path):
    """Mean sum rate against the sweep value, one line per method with stderr bars."""
    series = defaultdict(list)
    for row in rows:
        series[row.method].append((row.sweep_value, row.mean_rate, row.stderr))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, pts in series.items():
        x, y, e = zip(*sorted(pts))
        ax.errorbar(x, y, yerr=e, marker="o", capsize=3, label=method)
    axis = rows[0].sweep_axis if rows else ""
    ax.set_xlabel(_AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("sum rate (bits/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_traces(rows, path):
    """Outer-loop trace on the left, inner solver traces on the right."""
    series = defaultdict(list)
    for label, it, rate in rows:
        series[label].append((it, rate))
    fig, (outer, inner) = plt.subplots(1, 2, figsize=(10, 4))
    for label, pts in series.items():
        x, y = zip(*pts)
        if "/" in label:
            inner.plot(x, y, marker=".", lw=1, label=label)
        else:
            outer.plot(x, y, marker="o", label=label)
    outer.set_title("outer iterations")
    inner.set_title("inner solves")
    for ax in (outer, inner):
        ax.set_xlabel("iteration")
        ax.set_ylabel("sum rate (bits/s/Hz)")
        ax.grid(alpha=0.3)
    outer.legend()
    if len(series) - 1 <= 12:
        inner.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
