"""Benchmark figures, written as PNG files next to the JSON/CSV report."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = ["#4c72b0", "#55a868", "#c44e52", "#8172b2"]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_normalized(report, path):
    """Bar chart of mean latency per scenario divided by the baseline mean."""
    names = [s["scenario"] for s in report["scenarios"]]
    ratios = [s["latency"]["normalized"] for s in report["scenarios"]]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    bars = ax.bar(range(len(names)), ratios, color=COLORS[:len(names)], width=0.6)
    for bar, r in zip(bars, ratios):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height() + 0.01, f"{r:.2f}",
                ha="center", va="bottom", fontsize=9)
    ax.axhline(1.0, color="0.4", lw=0.8, ls="--")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels([n.replace("+", "\n+") for n in names], fontsize=8)
    ax.set_ylabel("Normalized packet latency")
    ax.set_ylim(0, max(ratios + [1.0]) * 1.2)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    return _finish(fig, path)


def plot_latency_cdf(samples, path):
    """Empirical CDF of per-packet latency, one curve per scenario.

    ``samples`` maps scenario name to a sequence of latencies in ns.
    """
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for color, (name, lat) in zip(COLORS, samples.items()):
        if not len(lat):
            continue
        x = np.sort(np.asarray(lat, dtype=float)) / 1e3
        y = np.arange(1, len(x) + 1) / len(x)
        ax.plot(x, y, color=color, lw=1.2, label=name)
    ax.set_xlabel("Latency (us)")
    ax.set_ylabel("CDF")
    # Clip the long tail so the bodies of the distributions stay readable.
    hi = max((np.percentile(v, 99.5) for v in samples.values() if len(v)), default=1.0) / 1e3
    ax.set_xlim(left=0, right=hi)
    ax.legend(fontsize=8, frameon=False, loc="lower right")
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def write_figures(report, samples, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    return [
        plot_normalized(report, os.path.join(out_dir, "normalized_latency.png")),
        plot_latency_cdf(samples, os.path.join(out_dir, "latency_cdf.png")),
    ]
