"""Fixed, versioned probe-task suites for held-out evaluation.

Probe seeds live above TRAINING_SEED_BOUND, so they are disjoint from every
seed a training run can draw, and each suite covers a representative set of
crossing classes.
"""

from __future__ import annotations

from ..expert import HALF_DROPOUT
from ..game import feasible_crossing_classes
from ..tasks import TRAINING_SEED_BOUND, TaskSpec, build_task
from ..worlds import WorldParams

PROBE_SUITE_VERSION = 1
_PROBE_BASE = TRAINING_SEED_BOUND  # 2**31: training seeds are all below this

SUITE_NAMES = ("empty4", "empty5", "complex")


def probe_suite(name: str, episode_length: int = 1800) -> list[TaskSpec]:
    """The fixed task list for a named suite.

    empty4 / empty5: flat, obstacle-free worlds with 4 / 5 goals, one task
    per achievable crossing class plus extra seeds. complex: worlds with
    obstacles and bumpy terrain, 4- and 5-goal games.
    """
    if name not in SUITE_NAMES:
        raise ValueError(f"unknown probe suite {name!r}; choose from {SUITE_NAMES}")

    def probe_seed(i: int) -> int:
        offset = SUITE_NAMES.index(name)
        return _PROBE_BASE + PROBE_SUITE_VERSION * 1_000_000 + offset * 100_000 + i * 977

    tasks: list[TaskSpec] = []
    if name in ("empty4", "empty5"):
        n = 4 if name == "empty4" else 5
        n_classes = len(feasible_crossing_classes(n))
        for i in range(2 * n_classes):
            seed = probe_seed(i)
            tasks.append(
                TaskSpec(
                    world=WorldParams(world_size=16.0, n_goals=n, seed=seed),
                    seed=seed + 1,
                    dropout=HALF_DROPOUT,
                    episode_length=episode_length,
                )
            )
    else:
        specs = [
            (4, 0.02, 0.003, 0.2), (4, 0.04, 0.0, 0.35),
            (5, 0.02, 0.003, 0.2), (5, 0.03, 0.004, 0.3),
            (4, 0.01, 0.005, 0.25), (5, 0.04, 0.002, 0.15),
        ]
        for i, (n, v_d, h_d, amp) in enumerate(specs):
            seed = probe_seed(i)
            tasks.append(
                TaskSpec(
                    world=WorldParams(
                        world_size=20.0,
                        n_goals=n,
                        v_obstacle_density=v_d,
                        h_obstacle_density=h_d,
                        terrain_amplitude=amp,
                        terrain_frequency=0.08,
                        seed=seed,
                    ),
                    seed=seed + 1,
                    dropout=HALF_DROPOUT,
                    episode_length=episode_length,
                )
            )
    return tasks


def suite_summary(name: str) -> list[dict]:
    rows = []
    for i, task in enumerate(probe_suite(name)):
        built = build_task(task)
        rows.append(
            {
                "suite": name,
                "index": i,
                "world_seed": task.world.seed,
                "n_goals": task.world.n_goals,
                "crossings": built.game.crossings,
                "order": "-".join(map(str, built.game.order.perm)),
            }
        )
    return rows
