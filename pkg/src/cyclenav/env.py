"""First-person avatar interface: discrete actions, planar ray sensing and
collision-aware kinematics on a generated world.

The sensor casts N_RAYS rays uniformly over azimuth, rotated by the avatar's
heading. Rays report the first object hit (objects are opaque); the world
boundary is invisible and reads as (none, 1.0). A hidden expert (visibility
bit 0) is excluded from both the rays and the avatar-target channel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import move_until_contact, ray_disc_hits, ray_segment_hits
from .worlds import AVATAR_RADIUS, World


class Action(enum.IntEnum):
    FORWARD = 0
    BACKWARD = 1
    ROTATE_LEFT = 2
    ROTATE_RIGHT = 3
    NOOP = 4


N_ACTIONS = len(Action)
ROTATION_DELTA = np.pi / 12.0
N_RAYS = 64


class RayKind(enum.IntEnum):
    NONE = 0
    V_OBSTACLE = 1
    H_OBSTACLE = 2
    GOAL = 3
    AVATAR = 4


N_RAY_KINDS = len(RayKind)
NO_COLOUR = -1

# Sensing cross-section of an avatar. Collision still uses AVATAR_RADIUS; the
# larger sensed disc keeps a co-player on at least one of 64 rays out to the
# far side of the largest worlds, which physical-radius avatars would not be.
AVATAR_SENSE_RADIUS = 1.2


def base_speed(world_size: float) -> float:
    """Unobstructed translation per step; a world crossing takes ~80 steps."""
    return world_size / 80.0


@lru_cache(maxsize=8)
def _base_fan(n_rays: int) -> np.ndarray:
    """Unit ray directions at heading 0, azimuths 2*pi*i/n."""
    a = 2.0 * np.pi * np.arange(n_rays) / n_rays
    return np.stack([np.cos(a), np.sin(a)], axis=-1)


def max_sense_range(world_size: float) -> float:
    """Sensor range: the world diagonal, so any in-world object is visible."""
    return world_size * np.sqrt(2.0)


@dataclass
class AvatarState:
    position: np.ndarray        # (2,) world units
    heading: float              # radians in [0, 2*pi)
    score: int = 0
    role: str = "agent"         # "agent" | "expert"


@dataclass(frozen=True)
class Observation:
    """One avatar's view of the world at a single step.

    avatar_target is the egocentric (dx, dy) offset of the nearest visible
    co-player, or None when there is none (absent or hidden). It is a
    regression target for the auxiliary loss and is never part of the
    network input vector.
    """

    ray_kinds: np.ndarray       # (R,) int8, RayKind values
    ray_distances: np.ndarray   # (R,) float64 in [0, 1]
    ray_colours: np.ndarray     # (R,) int8, colour id or NO_COLOUR
    prev_reward: float
    avatar_target: np.ndarray | None


def sense(
    world: World,
    self_state: AvatarState,
    others: list[AvatarState],
    e_t: int,
    prev_reward: float,
    n_rays: int = N_RAYS,
) -> Observation:
    """Cast the ray fan and assemble the observation for one avatar."""
    origin = self_state.position
    c, s = math.cos(self_state.heading), math.sin(self_state.heading)
    dirs = _base_fan(n_rays) @ np.array([[c, s], [-s, c]])
    rng_max = max_sense_range(world.size)

    visible = [o for o in others if o.role != "expert" or e_t == 1]

    centres, radii, disc_colours, n_v = world.static_discs
    if visible:
        centres = np.vstack([centres, [o.position for o in visible]])
        radii = np.concatenate([radii, np.full(len(visible), AVATAR_SENSE_RADIUS)])
        disc_colours = np.concatenate(
            [disc_colours, np.full(len(visible), NO_COLOUR, dtype=np.int8)]
        )
    n_static = n_v + len(world.goals)
    disc_kinds = np.empty(len(centres), dtype=np.int8)
    disc_kinds[:n_v] = RayKind.V_OBSTACLE
    disc_kinds[n_v:n_static] = RayKind.GOAL
    disc_kinds[n_static:] = RayKind.AVATAR

    if len(centres):
        hits = ray_disc_hits(origin, dirs, centres, radii)    # (R, M)
        idx = np.argmin(hits, axis=1)
        best_t = hits[np.arange(n_rays), idx]
        kinds = disc_kinds[idx].copy()
        colours = disc_colours[idx].copy()
    else:
        best_t = np.full(n_rays, np.inf)
        kinds = np.full(n_rays, RayKind.NONE, dtype=np.int8)
        colours = np.full(n_rays, NO_COLOUR, dtype=np.int8)

    if len(world.h_seg_a):
        seg = ray_segment_hits(origin, dirs, world.h_seg_a, world.h_seg_b)
        seg_t = seg.min(axis=1)
        closer = seg_t < best_t
        best_t = np.where(closer, seg_t, best_t)
        kinds[closer] = RayKind.H_OBSTACLE
        colours[closer] = NO_COLOUR

    beyond = best_t >= rng_max
    kinds[beyond] = RayKind.NONE
    colours[beyond] = NO_COLOUR
    distances = np.where(beyond, 1.0, best_t / rng_max)

    target = None
    if visible:
        deltas = np.array([o.position - origin for o in visible])
        nearest = deltas[np.argmin(np.linalg.norm(deltas, axis=1))]
        # rotate into the avatar frame (by -heading)
        target = np.array([c * nearest[0] + s * nearest[1],
                           -s * nearest[0] + c * nearest[1]])

    return Observation(
        ray_kinds=kinds,
        ray_distances=distances,
        ray_colours=colours,
        prev_reward=float(prev_reward),
        avatar_target=target,
    )


RAY_FEATURES = N_RAY_KINDS + 1 + 8   # kind one-hot, distance, colour one-hot
OBS_DIM = N_RAYS * RAY_FEATURES + 1  # + prev_reward


def encode_observation(obs: Observation) -> np.ndarray:
    """Flatten an Observation into the network input vector.

    Layout per ray: kind one-hot (5), normalised distance (1), colour one-hot
    (8, all-zero when no goal). prev_reward is appended at the end. The
    avatar-target channel is deliberately not included.
    """
    n = len(obs.ray_kinds)
    feat = np.zeros((n, RAY_FEATURES))
    feat[np.arange(n), obs.ray_kinds] = 1.0
    feat[:, N_RAY_KINDS] = obs.ray_distances
    has_colour = obs.ray_colours >= 0
    feat[has_colour, N_RAY_KINDS + 1 + obs.ray_colours[has_colour]] = 1.0
    return np.concatenate([feat.ravel(), [obs.prev_reward]])


def move_avatar(
    world: World, avatar: AvatarState, action: Action, speed_mult: float = 1.0
) -> AvatarState:
    """Apply one action in place. Translation is blocked by discs and the
    boundary (stop at contact, no penetration); slow zones and terrain scale
    speed. Returns the same (mutated) state."""
    if action == Action.NOOP:
        return avatar
    if action == Action.ROTATE_LEFT or action == Action.ROTATE_RIGHT:
        sign = 1.0 if action == Action.ROTATE_LEFT else -1.0
        avatar.heading = (avatar.heading + sign * ROTATION_DELTA) % (2 * np.pi)
        return avatar
    sign = 1.0 if action == Action.FORWARD else -1.0
    step = base_speed(world.size) * speed_mult * world.speed_multiplier(avatar.position)
    direction = np.array(
        [sign * math.cos(avatar.heading), sign * math.sin(avatar.heading)]
    )
    avatar.position = move_until_contact(
        avatar.position,
        direction,
        step,
        world.v_centres,
        world.v_radii_inflated,
        AVATAR_RADIUS,
        world.size - AVATAR_RADIUS,
    )
    return avatar


def goal_index_at(world: World, position: np.ndarray) -> int | None:
    """Index of the goal whose disc contains the position's centre, if any."""
    d2 = np.sum((world.goal_centres - position) ** 2, axis=1)
    i = int(np.argmin(d2))
    return i if d2[i] < world.goal_radius**2 else None
