"""Procedural world generation: square worlds with disc obstacles, slow-zone
segments, a smooth speed-penalty terrain field and non-overlapping goal discs.

Generation is a pure function of WorldParams: identical params (including the
seed) give byte-identical worlds. Obstacle counts are Poisson draws from
density * area; goal placement uses bounded rejection sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .geometry import point_segment_distance

N_COLOURS = 8
GOAL_REJECTION_BUDGET = 10_000
AVATAR_RADIUS = 0.5
V_OBSTACLE_DIAMETER_RANGE = (0.75, 2.25)
# Slow-zone segments: fraction of world size, with a fixed half-width band in
# which translation is slowed (they are traversable, unlike disc obstacles).
H_OBSTACLE_LENGTH_FRACTION = 0.5
H_OBSTACLE_HALFWIDTH = 0.5
H_OBSTACLE_SLOW_FACTOR = 0.4

WORLD_SIZE_LIMITS = (8.0, 64.0)


class GenerationError(Exception):
    """Raised when a world cannot be generated under the given constraints."""


def goal_diameter(w: float) -> float:
    """Goal disc diameter as a function of world size: w/8 + 2."""
    if w <= 0:
        raise ValueError(f"world size must be positive, got {w}")
    return w / 8.0 + 2.0


@dataclass(frozen=True)
class WorldParams:
    """Knobs of the procedural generator; the world is a pure function of these."""

    world_size: float = 16.0
    n_goals: int = 4
    v_obstacle_density: float = 0.0   # blocking discs per unit^2
    h_obstacle_density: float = 0.0   # slow-zone segments per unit^2
    terrain_amplitude: float = 0.0    # speed-penalty scale, 0 = flat
    terrain_frequency: float = 0.1    # noise field frequency per unit
    seed: int = 0

    def validate(self) -> None:
        lo, hi = WORLD_SIZE_LIMITS
        if not (lo <= self.world_size <= hi):
            raise ValueError(f"world_size {self.world_size} outside [{lo}, {hi}]")
        if self.n_goals < 1:
            raise ValueError("n_goals must be >= 1")
        if self.v_obstacle_density < 0 or self.h_obstacle_density < 0:
            raise ValueError("obstacle densities must be >= 0")
        if self.terrain_frequency < 0:
            raise ValueError("terrain_frequency must be >= 0")
        if self.terrain_amplitude < 0:
            raise ValueError("terrain_amplitude must be >= 0")


@dataclass(frozen=True)
class TerrainField:
    """Seeded value-noise speed multiplier: 1 / (1 + amplitude * noise(f*x, f*y)).

    noise() is bilinear interpolation of per-lattice-point values in [0, 1]
    derived from an integer hash, so the multiplier is continuous, lies in
    (0, 1], and is a pure function of (seed, amplitude, frequency, position).
    """

    amplitude: float
    frequency: float
    seed: int

    def noise(self, x, y):
        fx = np.asarray(x, dtype=np.float64) * self.frequency
        fy = np.asarray(y, dtype=np.float64) * self.frequency
        x0 = np.floor(fx).astype(np.int64)
        y0 = np.floor(fy).astype(np.int64)
        tx = fx - x0
        ty = fy - y0
        # smoothstep for C1 continuity across cell borders
        sx = tx * tx * (3 - 2 * tx)
        sy = ty * ty * (3 - 2 * ty)
        v00 = _lattice_hash(x0, y0, self.seed)
        v10 = _lattice_hash(x0 + 1, y0, self.seed)
        v01 = _lattice_hash(x0, y0 + 1, self.seed)
        v11 = _lattice_hash(x0 + 1, y0 + 1, self.seed)
        top = v00 + sx * (v10 - v00)
        bot = v01 + sx * (v11 - v01)
        return top + sy * (bot - top)

    def multiplier(self, x, y):
        return 1.0 / (1.0 + self.amplitude * self.noise(x, y))


def _lattice_hash(ix, iy, seed: int):
    """Deterministic hash of integer lattice coordinates to [0, 1)."""
    with np.errstate(over="ignore"):
        h = (np.asarray(ix, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)) ^ (
            np.asarray(iy, dtype=np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ) ^ np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        h ^= h >> np.uint64(33)
        h *= np.uint64(0xFF51AFD7ED558CCD)
        h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


@dataclass(frozen=True)
class Goal:
    centre: np.ndarray
    radius: float
    colour: int


@dataclass(frozen=True)
class World:
    """Immutable world geometry: everything an episode needs except the players."""

    size: float
    v_centres: np.ndarray        # (M, 2) blocking disc centres
    v_radii: np.ndarray          # (M,)
    h_seg_a: np.ndarray          # (K, 2) slow-zone segment endpoints
    h_seg_b: np.ndarray          # (K, 2)
    terrain: TerrainField
    goals: tuple[Goal, ...]
    params: WorldParams

    @cached_property
    def goal_centres(self) -> np.ndarray:
        return np.array([g.centre for g in self.goals]).reshape(-1, 2)

    @cached_property
    def goal_colours(self) -> np.ndarray:
        return np.array([g.colour for g in self.goals], dtype=np.int8)

    @property
    def goal_radius(self) -> float:
        return self.goals[0].radius if self.goals else 0.0

    def speed_multiplier(self, position: np.ndarray) -> float:
        """Terrain multiplier times the slow factor when inside a slow zone."""
        if self.terrain.amplitude > 0:
            m = float(self.terrain.multiplier(position[0], position[1]))
        else:
            m = 1.0
        for a, b in zip(self.h_seg_a, self.h_seg_b):
            if point_segment_distance(position, a, b) < H_OBSTACLE_HALFWIDTH + AVATAR_RADIUS:
                m *= H_OBSTACLE_SLOW_FACTOR
                break
        return m

    @cached_property
    def v_radii_inflated(self) -> np.ndarray:
        """Obstacle radii grown by the avatar radius (collision hot path)."""
        return self.v_radii + AVATAR_RADIUS

    @cached_property
    def static_discs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """(centres, radii, colours, n_obstacles): all static disc sensables,
        blocking obstacles first, then goals. Cached for the sensor hot path."""
        n_v, n_g = len(self.v_centres), len(self.goals)
        centres = np.vstack([self.v_centres, self.goal_centres]) if n_v else self.goal_centres
        radii = np.concatenate([self.v_radii, np.full(n_g, self.goal_radius)])
        colours = np.concatenate([np.full(n_v, -1, dtype=np.int8),
                                  self.goal_colours.astype(np.int8)])
        return centres, radii, colours, n_v

    def with_goals(self, centres: np.ndarray, colours) -> "World":
        r = goal_diameter(self.size) / 2.0
        goals = tuple(
            Goal(np.asarray(c, dtype=np.float64), r, int(col))
            for c, col in zip(centres, colours)
        )
        return replace(self, goals=goals)


def sample_goal_positions(
    rng: np.random.Generator,
    world_size: float,
    n_goals: int,
    v_centres: np.ndarray,
    v_radii: np.ndarray,
    budget: int = GOAL_REJECTION_BUDGET,
) -> np.ndarray:
    """Rejection-sample n non-overlapping goal centres inside the world.

    Goals must not overlap each other, must lie fully inside [0, w]^2 and must
    keep their centre reachable (no blocking disc too close to the centre).
    Raises GenerationError when the budget is exhausted.
    """
    r = goal_diameter(world_size) / 2.0
    if 2 * r > world_size:
        raise GenerationError(
            f"goal diameter {2 * r} exceeds world size {world_size}"
        )
    placed: list[np.ndarray] = []
    attempts = 0
    while len(placed) < n_goals:
        if attempts >= budget:
            raise GenerationError(
                f"could not place {n_goals} non-overlapping goals of radius {r} "
                f"in a {world_size}x{world_size} world within {budget} attempts"
            )
        attempts += 1
        c = rng.uniform(r, world_size - r, size=2)
        if any(np.linalg.norm(c - p) < 2 * r for p in placed):
            continue
        if len(v_centres) and np.any(
            np.linalg.norm(v_centres - c, axis=1) < v_radii + AVATAR_RADIUS + 0.25
        ):
            continue
        placed.append(c)
    return np.array(placed)


def generate_world(params: WorldParams) -> World:
    """Deterministically generate a world from params.

    Streams: obstacle layout, goal placement and colours each consume their own
    child of the seed sequence, so e.g. changing the goal count does not move
    the obstacles.
    """
    params.validate()
    w = params.world_size
    ss = np.random.SeedSequence(params.seed)
    obstacle_ss, goal_ss, colour_ss, terrain_ss = ss.spawn(4)
    obstacle_rng = np.random.default_rng(obstacle_ss)
    goal_rng = np.random.default_rng(goal_ss)
    colour_rng = np.random.default_rng(colour_ss)

    area = w * w
    n_v = int(obstacle_rng.poisson(params.v_obstacle_density * area))
    v_radii = obstacle_rng.uniform(*V_OBSTACLE_DIAMETER_RANGE, size=n_v) / 2.0
    v_centres = (
        obstacle_rng.uniform(0, w, size=(n_v, 2)) if n_v else np.zeros((0, 2))
    )
    # keep blocking discs fully inside the world
    if n_v:
        v_centres = np.clip(v_centres, v_radii[:, None], w - v_radii[:, None])

    n_h = int(obstacle_rng.poisson(params.h_obstacle_density * area))
    seg_a, seg_b = [], []
    length = H_OBSTACLE_LENGTH_FRACTION * w
    for _ in range(n_h):
        for _attempt in range(100):
            centre = obstacle_rng.uniform(0, w, size=2)
            angle = obstacle_rng.uniform(0, 2 * np.pi)
            d = np.array([np.cos(angle), np.sin(angle)]) * (length / 2.0)
            a, b = centre - d, centre + d
            if (a >= 0).all() and (a <= w).all() and (b >= 0).all() and (b <= w).all():
                seg_a.append(a)
                seg_b.append(b)
                break
    h_seg_a = np.array(seg_a) if seg_a else np.zeros((0, 2))
    h_seg_b = np.array(seg_b) if seg_b else np.zeros((0, 2))

    terrain = TerrainField(
        amplitude=params.terrain_amplitude,
        frequency=params.terrain_frequency,
        seed=int(terrain_ss.generate_state(1, dtype=np.uint64)[0]),
    )

    centres = sample_goal_positions(goal_rng, w, params.n_goals, v_centres, v_radii)
    colours = colour_rng.choice(N_COLOURS, size=params.n_goals, replace=False)
    r = goal_diameter(w) / 2.0
    goals = tuple(
        Goal(np.asarray(c, dtype=np.float64), r, int(col))
        for c, col in zip(centres, colours)
    )
    return World(
        size=w,
        v_centres=v_centres,
        v_radii=v_radii,
        h_seg_a=h_seg_a,
        h_seg_b=h_seg_b,
        terrain=terrain,
        goals=goals,
        params=params,
    )
