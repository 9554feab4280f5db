from typing import Mapping, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def line_plot(x, series: Mapping[str, Sequence[float]], title, xlabel, ylabel, path):
    fig = plt.figure(figsize=(8, 4.5))
    for label, y in series.items():
        plt.plot(x, y, label=label)
    plt.axhline(0.0, color="#999", linewidth=0.8)
    plt.title(title)
    plt.xlabel(xlabel)
    plt.ylabel(ylabel)
    if len(series) > 1:
        plt.legend()
    fig.autofmt_xdate()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def source_share_plot(shares: Mapping[str, float], path):
    """Horizontal bars of news share per source, largest on top."""
    names = list(shares)[::-1]
    pcts = [shares[n] for n in names]
    fig = plt.figure(figsize=(7, 1.2 + 0.35 * len(names)))
    bars = plt.barh(names, pcts, color="#4c72b0")
    plt.bar_label(bars, labels=[f"{p:.1f}%" for p in pcts], padding=3, fontsize=8)
    plt.xlim(0, max(pcts, default=0.0) * 1.15 or 1.0)
    plt.title(f"News by source ({len(names)} sources)")
    plt.xlabel("Share of news items (%)")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def overlay_plot(series: Mapping[str, tuple], title, xlabel, ylabel, path):
    """Like ``line_plot`` but every series brings its own x values."""
    fig = plt.figure(figsize=(8, 4.5))
    for label, (x, y) in series.items():
        plt.plot(x, y, label=label)
    plt.axhline(0.0, color="#999", linewidth=0.8)
    plt.title(title)
    plt.xlabel(xlabel)
    plt.ylabel(ylabel)
    plt.legend()
    fig.autofmt_xdate()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
