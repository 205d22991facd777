"""Figure rendering for reports.

All figures go straight to files; CSV stays the machine-readable
interface and nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from fstsp.hgenfs import HistoryEntry
from fstsp.instance import Instance
from fstsp.solution import Solution


def plot_route(inst: Instance, sol: Solution, path: str | Path, title: str | None = None) -> None:
    """Draw the truck tour and drone sorties over the node positions."""
    fig, ax = plt.subplots(figsize=(6, 6))
    xs = [p.x for p in inst.nodes]
    ys = [p.y for p in inst.nodes]
    route_x = [xs[v] for v in sol.truck_route]
    route_y = [ys[v] for v in sol.truck_route]
    ax.plot(route_x, route_y, "-o", color="tab:blue", label="truck", zorder=2)
    for s in sol.sorties:
        ax.plot(
            [xs[s.i], xs[s.j], xs[s.k]],
            [ys[s.i], ys[s.j], ys[s.k]],
            "--^",
            color="tab:orange",
            label="drone" if s == sol.sorties[0] else None,
            zorder=3,
        )
    ax.scatter([xs[0]], [ys[0]], marker="s", s=90, color="black", label="depot", zorder=4)
    for v in inst.customers:
        ax.annotate(str(v), (xs[v], ys[v]), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or inst.name)
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_history(history: list[HistoryEntry], path: str | Path, title: str = "") -> None:
    """Best-cost-versus-time staircase, one line per restart."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_restart: dict[int, list[HistoryEntry]] = {}
    for entry in history:
        by_restart.setdefault(entry.restart, []).append(entry)
    for restart, entries in sorted(by_restart.items()):
        entries.sort(key=lambda e: e.elapsed_s)
        ax.step(
            [e.elapsed_s for e in entries],
            [e.best_cost for e in entries],
            where="post",
            label=f"restart {restart}",
        )
    ax.set_xlabel("elapsed [s]")
    ax.set_ylabel("best cost [min]")
    if title:
        ax.set_title(title)
    if by_restart:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_bench_summary(
    preset_names: list[str],
    averages: dict[str, float],
    path: str | Path,
    time_limit: float,
) -> None:
    """Bar chart of average time-to-target per parameter preset."""
    fig, ax = plt.subplots(figsize=(6, 4))
    values = [averages.get(name, float("nan")) for name in preset_names]
    ax.bar(preset_names, values, color="tab:blue")
    ax.axhline(time_limit, color="tab:red", linestyle=":", label="time limit")
    ax.set_ylabel("avg time to target [s]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
