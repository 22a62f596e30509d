"""SVG plot emission for metrics logs, trajectory comparisons and ADR traces."""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt
import numpy as np

GOAL_PALETTE = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8",
    "#f58231", "#911eb4", "#46f0f0", "#f032e6",
]


def plot_metrics(rows: list[dict], path: str) -> None:
    """Score and training-ct curves from a metrics log."""
    steps = [r["env_steps"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
    axes[0].plot(steps, [r.get("mean_score", np.nan) for r in rows])
    axes[0].set_xlabel("environment steps")
    axes[0].set_ylabel("mean episode score")
    axes[1].plot(steps, [r.get("train_ct", np.nan) for r in rows], color="tab:orange")
    axes[1].axhline(0.75, ls=":", c="grey", lw=0.8)
    axes[1].set_xlabel("environment steps")
    axes[1].set_ylabel("training ct")
    axes[1].set_ylim(-0.2, 1.1)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_world(ax, world) -> None:
    ax.set_xlim(0, world.size)
    ax.set_ylim(0, world.size)
    ax.set_aspect("equal")
    for g in world.goals:
        ax.add_patch(
            plt.Circle(g.centre, g.radius, alpha=0.25,
                       color=GOAL_PALETTE[g.colour % len(GOAL_PALETTE)])
        )
    for c, r in zip(world.v_centres, world.v_radii):
        ax.add_patch(plt.Circle(c, r, color="dimgrey"))
    for a, b in zip(world.h_seg_a, world.h_seg_b):
        ax.plot([a[0], b[0]], [a[1], b[1]], color="saddlebrown", lw=3, alpha=0.6)


def plot_trajectory_comparison(comparison, path: str) -> None:
    """Agent/expert paths with visibility shading and goal-entry marks."""
    fig, (ax, axt) = plt.subplots(
        1, 2, figsize=(11, 4.5), gridspec_kw={"width_ratios": [1, 1.4]}
    )
    plot_world(ax, comparison.world)
    ax.plot(*comparison.agent_path.T, color="tab:blue", lw=0.8, label="agent")
    if comparison.expert_path is not None:
        vis = comparison.expert_visible.astype(bool)
        p = comparison.expert_path
        ax.plot(p[vis, 0], p[vis, 1], color="tab:red", lw=0.8, label="expert")
    ax.legend(loc="upper right", fontsize=7)
    ax.set_title(comparison.scenario)

    t_max = len(comparison.agent_path)
    axt.plot(np.arange(t_max), comparison.agent_path[:, 1], color="tab:blue",
             lw=0.8, label="agent y")
    if comparison.expert_path is not None:
        axt.plot(np.arange(t_max), comparison.expert_path[:, 1], color="tab:red",
                 lw=0.8, alpha=0.7, label="expert y")
        if not comparison.expert_visible.all():
            first_hidden = int(np.argmin(comparison.expert_visible))
            axt.axvspan(first_hidden, t_max, color="grey", alpha=0.15,
                        label="expert hidden")
    for t, goal, reward in comparison.agent_events:
        axt.plot(t, comparison.agent_path[t, 1],
                 marker="x" if reward < 0 else "o",
                 ms=4, color="black" if reward < 0 else
                 GOAL_PALETTE[comparison.world.goals[goal].colour % 8])
    axt.set_xlabel("step")
    axt.set_ylabel("position (y)")
    axt.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_adr_trace(trace: list[dict], path: str) -> None:
    """Boundary evolution per parameter over controller updates."""
    if not trace:
        raise ValueError("empty trace")
    names = list(trace[0])
    fig, axes = plt.subplots(
        (len(names) + 2) // 3, 3, figsize=(11, 2.6 * ((len(names) + 2) // 3))
    )
    axes = np.atleast_1d(axes).ravel()
    for ax, name in zip(axes, names):
        lo = [step[name][0] for step in trace]
        hi = [step[name][1] for step in trace]
        ax.fill_between(range(len(trace)), lo, hi, alpha=0.3)
        ax.plot(lo, lw=0.8)
        ax.plot(hi, lw=0.8)
        ax.set_title(name, fontsize=8)
    for ax in axes[len(names):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_sweep(cells, path: str) -> None:
    values = [c.value for c in cells]
    scores = [np.nan if c.normalised_score is None else c.normalised_score for c in cells]
    ood = [c.ood for c in cells]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    colors = ["tab:red" if o else "tab:blue" for o in ood]
    ax.bar(range(len(values)), scores, color=colors, alpha=0.8)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels([f"{v:g}" for v in values], rotation=45, fontsize=7)
    ax.axhline(1.0, ls=":", c="grey", lw=0.8)
    ax.axhline(2.0, ls=":", c="grey", lw=0.8)
    ax.set_xlabel(cells[0].axis if cells else "")
    ax.set_ylabel("normalised score")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def load_metrics_csv(path: str) -> list[dict]:
    import csv

    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                try:
                    parsed[k] = json.loads(v) if v and v[0] in "[{" else float(v)
                except (ValueError, json.JSONDecodeError):
                    parsed[k] = v
            rows.append(parsed)
    return rows
