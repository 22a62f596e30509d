"""TaskSpec: the unit of procedural generation.

A task bundles world parameters, the game (derived deterministically from the
task seed, uniform over crossing topologies by default), the expert
configuration and the dropout scheme. Building the same spec twice yields
identical worlds and games; episode-level randomness (spawns, expert
direction, dropout toggles, expert noise) is also derived from the task seed,
so a task plus the policy seeds fully determines a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .expert import DropoutScheme, ExpertConfig, NO_DROPOUT
from .game import (
    GameSpec,
    classify_crossings,
    sample_game_uniform_topology,
    sample_order,
)
from .worlds import World, WorldParams, generate_world, sample_goal_positions

DEFAULT_EPISODE_LENGTH = 900

# Training draws task seeds below this bound; probe suites draw above it, so
# the two seed families are disjoint by construction.
TRAINING_SEED_BOUND = 2**31


@dataclass(frozen=True)
class TaskSpec:
    world: WorldParams
    seed: int = 0
    expert_speed: float = 1.0
    expert_noise: float = 0.0
    dropout: DropoutScheme = NO_DROPOUT
    episode_length: int = DEFAULT_EPISODE_LENGTH
    expert_direction: int | None = None   # +1, -1 or None -> drawn from seed
    uniform_topology: bool = True
    has_expert: bool = True

    def expert_config(self) -> ExpertConfig:
        return ExpertConfig(speed=self.expert_speed, noise=self.expert_noise)

    def with_dropout(self, scheme: DropoutScheme) -> "TaskSpec":
        return replace(self, dropout=scheme)


@dataclass(frozen=True)
class BuiltTask:
    spec: TaskSpec
    world: World
    game: GameSpec


def _streams(task: TaskSpec) -> dict[str, np.random.SeedSequence]:
    names = ("game", "spawn", "direction", "dropout", "noise", "policy")
    children = np.random.SeedSequence(task.seed).spawn(len(names))
    return dict(zip(names, children))


def episode_rng(task: TaskSpec, stream: str) -> np.random.Generator:
    return np.random.default_rng(_streams(task)[stream])


def build_task(task: TaskSpec) -> BuiltTask:
    """Generate the world and game for a spec. Pure function of the spec."""
    world = generate_world(task.world)
    rng = episode_rng(task, "game")
    n = task.world.n_goals
    if task.uniform_topology and n >= 4:
        def placement(r: np.random.Generator) -> np.ndarray:
            return sample_goal_positions(
                r, world.size, n, world.v_centres, world.v_radii
            )

        positions, game = sample_game_uniform_topology(placement, n, rng)
        colours = [g.colour for g in world.goals]
        world = world.with_goals(positions, colours)
    else:
        order = sample_order(n, rng)
        game = GameSpec(
            n=n, order=order, crossings=classify_crossings(world.goal_centres, order)
        )
    return BuiltTask(spec=task, world=world, game=game)


def expert_direction_for(task: TaskSpec) -> int:
    """The demonstrated direction: fixed by the spec or drawn 50/50 per task."""
    if task.expert_direction is not None:
        return task.expert_direction
    return 1 if episode_rng(task, "direction").random() < 0.5 else -1
