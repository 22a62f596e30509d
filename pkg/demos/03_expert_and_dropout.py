"""Scripted experts walking their cycles under the four dropout schemes."""

import numpy as np

from cyclenav.episodes import run_episode
from cyclenav.expert import (
    FULL_DROPOUT,
    HALF_DROPOUT,
    NO_DROPOUT,
    probabilistic_dropout,
)
from cyclenav.tasks import TaskSpec
from cyclenav.worlds import WorldParams


def show(label, task):
    res = run_episode(task)
    visible = sum(s.e for s in res.steps)
    entries = res.entry_events("expert")
    negs = sum(1 for _, _, r in entries if r < 0)
    print(f"  {label:<24} score={res.scores['expert']:>3}  visible {visible}/"
          f"{len(res.steps)} steps, {len(entries)} entries, {negs} wrong")


base = dict(world=WorldParams(world_size=16, n_goals=4, seed=5), seed=5,
            episode_length=900)

print("== dropout schemes (expert solo, same world) ==")
show("no dropout", TaskSpec(**base, dropout=NO_DROPOUT))
show("half dropout", TaskSpec(**base, dropout=HALF_DROPOUT))
show("full dropout", TaskSpec(**base, dropout=FULL_DROPOUT))
show("probabilistic p=20/1800", TaskSpec(**base, dropout=probabilistic_dropout(20 / 1800)))

print("\n== action noise degrades the expert ==")
for noise in (0.0, 0.2, 0.4, 0.6):
    scores = []
    for seed in range(5):
        t = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=seed),
                     seed=seed, episode_length=900, expert_noise=noise)
        scores.append(run_episode(t).scores["expert"])
    print(f"  noise={noise:.1f}: mean score {np.mean(scores):5.1f}")

print("\n== obstacles and terrain slow the expert down ==")
for label, extra in (
    ("flat empty", {}),
    ("obstacles", {"v_obstacle_density": 0.03, "h_obstacle_density": 0.004}),
    ("bumpy", {"terrain_amplitude": 0.4, "terrain_frequency": 0.08}),
):
    scores = []
    for seed in range(5):
        t = TaskSpec(world=WorldParams(world_size=20, n_goals=5, seed=seed, **extra),
                     seed=seed, episode_length=900)
        scores.append(run_episode(t).scores["expert"])
    print(f"  {label:<12} mean score {np.mean(scores):5.1f}")
