"""Report figures, rendered as deterministic SVG files.

All figures go through :func:`save_figure`, which pins matplotlib's hash
salt and strips the date metadata so that identical inputs produce
byte-identical SVG output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "vidplan"


def save_figure(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def decay_figure(ages: list[int], overall_speeds: list[float],
                 per_sf_fractions: dict[str, list[float]], k: float):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(ages, overall_speeds, marker="o", color="tab:blue")
    ax1.set_xlabel("age (days)")
    ax1.set_ylabel("overall relative speed")
    ax1.set_ylim(0, 1.05)
    ax1.set_title(f"speed decay (k={k:.3f})")
    ax1.grid(True, alpha=0.3)
    for label, fracs in sorted(per_sf_fractions.items()):
        ax2.plot(ages, [100 * f for f in fracs], marker=".", label=label)
    ax2.set_xlabel("age (days)")
    ax2.set_ylabel("deleted segments (%)")
    ax2.set_ylim(-2, 102)
    ax2.legend(fontsize=7)
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def pareto_figure(points: list[tuple[float, float]], frontier: list[tuple[float, float]],
                  scaled_frontier: list[tuple[float, float]] | None = None):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    if points:
        xs, ys = zip(*points)
        ax.scatter(xs, ys, s=18, alpha=0.45, color="gray", label="setups")
    if frontier:
        fx, fy = zip(*frontier)
        ax.step(fx, fy, where="post", color="tab:red", marker="o", label="frontier")
    if scaled_frontier:
        sx, sy = zip(*scaled_frontier)
        ax.step(sx, sy, where="post", color="tab:green", marker="s",
                label="what-if frontier")
    ax.set_xlabel("hardware cost ($)")
    ax.set_ylabel("utility (weighted fps)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def trajectory_figure(trajectory: list[tuple[float, float]], base_utility: float):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    times = [0.0] + [t for t, _u in trajectory]
    utils = [base_utility] + [u for _t, u in trajectory]
    ax.step(times, utils, where="post", color="tab:blue", marker="o")
    ax.set_xlabel("migration time (s)")
    ax.set_ylabel("utility (weighted fps)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def sim_figure(utilization: dict[str, float], spreads: dict[str, float]):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    if utilization:
        names = sorted(utilization)
        ax1.bar(names, [utilization[n] for n in names], color="tab:blue")
    ax1.set_ylabel("device utilization")
    ax1.set_ylim(0, 1.05)
    ax1.tick_params(axis="x", rotation=30)
    if spreads:
        names = sorted(spreads)
        ax2.bar(names, [spreads[n] for n in names], color="tab:orange")
    ax2.set_ylabel("max watermark spread (s)")
    fig.tight_layout()
    return fig
