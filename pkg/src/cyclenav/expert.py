"""Scripted oracle co-players and expert-dropout schedules.

The expert knows the rewarding cycle and walks it using grid pathfinding with
string-pulling; it is heuristic, not optimal. Dropout schedules decide, per
step, whether the expert is visible to (and sensed by) the other players.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .env import ROTATION_DELTA, Action, N_ACTIONS
from .game import CyclicOrder, RewardContext
from .geometry import ray_disc_hits
from .worlds import AVATAR_RADIUS, World

# ADR controls expert speed in nominal units 7..14; translation multipliers
# are mapped linearly onto [0.5, 1.75] x base speed.
SPEED_UNITS_RANGE = (7.0, 14.0)
SPEED_MULT_RANGE = (0.5, 1.75)


def speed_units_to_multiplier(units: float) -> float:
    (u0, u1), (m0, m1) = SPEED_UNITS_RANGE, SPEED_MULT_RANGE
    return m0 + (units - u0) * (m1 - m0) / (u1 - u0)


@dataclass(frozen=True)
class ExpertConfig:
    speed: float = 1.0     # multiplier on base translation speed
    noise: float = 0.0     # probability of a uniform random action

    def validate(self) -> None:
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise {self.noise} outside [0, 1]")
        if self.speed <= 0:
            raise ValueError("speed must be positive")


@dataclass(frozen=True)
class DropoutScheme:
    """Visibility schedule for the expert: no / full / half / probabilistic(p)."""

    kind: str
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("no", "full", "half", "probabilistic"):
            raise ValueError(f"unknown dropout kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"transition probability {self.p} outside [0, 1]")


NO_DROPOUT = DropoutScheme("no")
FULL_DROPOUT = DropoutScheme("full")
HALF_DROPOUT = DropoutScheme("half")


def probabilistic_dropout(p: float) -> DropoutScheme:
    return DropoutScheme("probabilistic", p)


def initial_visibility(scheme: DropoutScheme) -> int:
    return 0 if scheme.kind == "full" else 1


def dropout_advance(
    scheme: DropoutScheme, e: int, t: int, n_steps: int, rng: np.random.Generator | None
) -> int:
    """Visibility for step t, given visibility e at step t-1.

    no -> always 1; full -> always 0; half -> 1 iff t <= floor(N/2);
    probabilistic(p) -> toggle e with probability p. The rng is consulted
    only by the probabilistic scheme.
    """
    if not 0 <= t < n_steps:
        raise ValueError(f"step {t} outside [0, {n_steps})")
    if scheme.kind == "no":
        return 1
    if scheme.kind == "full":
        return 0
    if scheme.kind == "half":
        return 1 if t <= n_steps // 2 else 0
    if rng.random() < scheme.p:
        return 1 - e
    return e


class PlanningError(Exception):
    """Target unreachable on the navigation grid."""


def _line_clear(a: np.ndarray, b: np.ndarray, centres: np.ndarray, radii: np.ndarray) -> bool:
    """True when the segment a->b stays outside every inflated disc."""
    if len(centres) == 0:
        return True
    d = b - a
    dist = float(np.linalg.norm(d))
    if dist < 1e-12:
        return not np.any(np.linalg.norm(centres - a, axis=1) < radii)
    hits = ray_disc_hits(a, (d / dist)[None, :], centres, radii)[0]
    return not np.any(hits < dist)


def plan_path(
    world: World,
    start: np.ndarray,
    goal: np.ndarray,
    extra_centres: np.ndarray | None = None,
    extra_radii: np.ndarray | None = None,
) -> np.ndarray:
    """Obstacle-free waypoint polyline from start to goal.

    A* over an occupancy grid (cell = half the goal radius), then
    string-pulled with exact line-of-sight checks so every waypoint-to-
    waypoint segment keeps clearance >= the avatar radius from blocking
    discs. extra_centres/extra_radii add soft keep-out discs (radii used as
    given; on the grid they block only cells whose centre lies inside, since
    crossing them is undesirable rather than physically impossible).
    Raises PlanningError when no route exists.
    """
    hard_c = world.v_centres
    hard_r = world.v_radii + AVATAR_RADIUS
    soft_c = np.asarray(extra_centres) if extra_centres is not None else np.zeros((0, 2))
    soft_r = np.asarray(extra_radii) if extra_radii is not None else np.zeros(0)
    centres = np.vstack([hard_c, soft_c]) if len(hard_c) or len(soft_c) else np.zeros((0, 2))
    radii = np.concatenate([hard_r, soft_r])

    if _line_clear(start, goal, centres, radii):
        return np.array([goal])

    cell = world.goal_radius / 2.0
    n = max(2, int(np.ceil(world.size / cell)))
    cell = world.size / n
    xs = (np.arange(n) + 0.5) * cell
    grid_pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1)  # (n, n, 2)
    blocked = np.zeros((n, n), dtype=bool)
    inflate = cell * np.sqrt(2) / 2.0
    for c, r in zip(hard_c, hard_r):
        d = np.linalg.norm(grid_pts - c, axis=-1)
        blocked |= d < r + inflate
    for c, r in zip(soft_c, soft_r):
        d = np.linalg.norm(grid_pts - c, axis=-1)
        blocked |= d < r

    def to_cell(p):
        ij = np.clip((p / cell).astype(int), 0, n - 1)
        return int(ij[0]), int(ij[1])

    def nearest_free(ij, max_cells=None):
        if not blocked[ij]:
            return ij
        free = np.argwhere(~blocked)
        if len(free) == 0:
            raise PlanningError("every grid cell is blocked")
        d = np.abs(free - np.array(ij)).sum(axis=1)
        k = int(np.argmin(d))
        if max_cells is not None and d[k] > max_cells:
            raise PlanningError(
                f"target cell is blocked and no free cell within {max_cells} cells"
            )
        return int(free[k][0]), int(free[k][1])

    start_ij = nearest_free(to_cell(start))
    goal_ij = nearest_free(to_cell(goal), max_cells=3)

    steps = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
             (-1, -1, np.sqrt(2)), (-1, 1, np.sqrt(2)),
             (1, -1, np.sqrt(2)), (1, 1, np.sqrt(2))]
    g_cost = {start_ij: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    h0 = float(np.hypot(start_ij[0] - goal_ij[0], start_ij[1] - goal_ij[1]))
    frontier = [(h0, start_ij)]
    found = False
    while frontier:
        _, cur = heapq.heappop(frontier)
        if cur == goal_ij:
            found = True
            break
        if cur in closed:
            continue
        closed.add(cur)
        for di, dj, w in steps:
            ni, nj = cur[0] + di, cur[1] + dj
            if not (0 <= ni < n and 0 <= nj < n) or blocked[ni, nj]:
                continue
            if di and dj and (blocked[cur[0] + di, cur[1]] or blocked[cur[0], cur[1] + dj]):
                continue  # no corner cutting
            cand = g_cost[cur] + w
            if cand < g_cost.get((ni, nj), np.inf):
                g_cost[(ni, nj)] = cand
                came[(ni, nj)] = cur
                h = float(np.hypot(ni - goal_ij[0], nj - goal_ij[1]))
                heapq.heappush(frontier, (cand + h, (ni, nj)))
    if not found:
        raise PlanningError(
            f"no route from {start.round(2)} to {goal.round(2)}"
        )

    cells = [goal_ij]
    while cells[-1] != start_ij:
        cells.append(came[cells[-1]])
    cells.reverse()
    pts = [start] + [grid_pts[ij] for ij in cells[1:]] + [goal]

    # string pulling: greedily jump to the farthest point with line of sight
    pulled = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _line_clear(pts[i], pts[j], centres, radii):
            j -= 1
        pulled.append(pts[j])
        i = j
    return np.array(pulled[1:])


@dataclass
class _Plan:
    waypoints: np.ndarray
    target_goal: int
    age: int = 0


class ExpertController:
    """Scripted expert: walk the rewarding cycle, optionally with action noise.

    The controller reads privileged episode state (its own pose and reward
    context, the world and the game order). It plans to the next goal in its
    chosen direction, avoiding other goal discs so it never scores -1 when
    noise-free, and falls back to direct steering when planning fails.
    """

    REPLAN_EVERY = 50
    WAYPOINT_TOL = 0.5
    # clearance added around non-target goals: covers the waypoint pop
    # tolerance plus the turning-arc deviation from the checked polyline
    GOAL_AVOID_MARGIN = 1.2

    def __init__(self, config: ExpertConfig, order: CyclicOrder, direction: int,
                 rng: np.random.Generator):
        config.validate()
        self.config = config
        self.order = order
        self.direction = direction
        self.rng = rng
        self._plan: _Plan | None = None
        self._last_pos: np.ndarray | None = None
        self._last_was_forward = False
        self._stuck = 0
        self._skim_dir: Action | None = None
        self._skim_hold = 0
        self._committed: int | None = None

    def next_goal(self, world: World, position: np.ndarray, ctx: RewardContext) -> int:
        if ctx.last is None:
            d = np.linalg.norm(world.goal_centres - position, axis=1)
            # a goal we are already inside cannot produce an entry event
            for i, g in enumerate(world.goals):
                if np.linalg.norm(position - g.centre) < g.radius:
                    d[i] = np.inf
            return int(np.argmin(d))
        return self.order.successor(ctx.last, self.direction)

    def act(self, world: World, state, ctx: RewardContext) -> Action:
        # stuck against geometry: the last forward made no progress
        if self._last_was_forward and self._last_pos is not None:
            if math.hypot(state.position[0] - self._last_pos[0],
                          state.position[1] - self._last_pos[1]) < 0.02:
                self._stuck += 1
            else:
                self._stuck = 0
        self._last_pos = state.position.copy()
        self._last_was_forward = False
        if self.config.noise > 0 and self.rng.random() < self.config.noise:
            a = Action(int(self.rng.integers(N_ACTIONS)))
            self._last_was_forward = a == Action.FORWARD
            return a
        target = self.next_goal(world, state.position, ctx)
        # carry each entry about one unit deep before turning away, so the
        # demonstrated path visibly passes through the goal, not just its rim
        if self._committed is not None and self._committed != target:
            g = world.goals[self._committed]
            depth = g.radius - math.hypot(state.position[0] - g.centre[0],
                                          state.position[1] - g.centre[1])
            if 0 <= depth < min(1.0, g.radius / 2):
                target = self._committed
        self._committed = target
        plan = self._plan
        if plan is None or plan.target_goal != target or plan.age >= self.REPLAN_EVERY \
                or len(plan.waypoints) == 0 or self._stuck >= 2:
            self._plan = plan = self._replan(world, state.position, target)
            self._stuck = 0
        plan.age += 1
        while len(plan.waypoints) > 1 and math.hypot(
                plan.waypoints[0][0] - state.position[0],
                plan.waypoints[0][1] - state.position[1]) < self.WAYPOINT_TOL:
            plan.waypoints = plan.waypoints[1:]
        # skim mode: committed to rotating away from a non-target goal until
        # moving forward is safe again (avoids steer/guard oscillation)
        offending = self._forward_enters_wrong_goal(world, state, target, ctx)
        if self._skim_dir is not None:
            if offending is None:
                self._last_was_forward = True
                self._skim_hold -= 1
                if self._skim_hold <= 0:
                    self._skim_dir = None
                    self._plan = None   # route afresh from the detour position
                return Action.FORWARD
            return self._skim_dir
        if offending is not None:
            bearing = math.atan2(offending[1] - state.position[1],
                                 offending[0] - state.position[0])
            rel = (bearing - state.heading + np.pi) % (2 * np.pi) - np.pi
            self._skim_dir = Action.ROTATE_RIGHT if rel > 0 else Action.ROTATE_LEFT
            self._skim_hold = 4
            return self._skim_dir

        wp = plan.waypoints[0]
        dx, dy = wp[0] - state.position[0], wp[1] - state.position[1]
        if dx * dx + dy * dy < 1e-12:
            return Action.NOOP
        desired = math.atan2(dy, dx)
        err = (desired - state.heading + np.pi) % (2 * np.pi) - np.pi
        if abs(err) > ROTATION_DELTA / 2:
            return Action.ROTATE_LEFT if err > 0 else Action.ROTATE_RIGHT
        self._last_was_forward = True
        return Action.FORWARD

    def _forward_enters_wrong_goal(self, world: World, state, target: int,
                                   ctx: RewardContext):
        """Centre of the goal a forward step would wrongly enter, or None.

        The target, the last-entered goal (re-entry pays 0) and any goal the
        expert is currently inside (leaving is not an entry) are all harmless.
        """
        from .env import base_speed

        step = base_speed(world.size) * self.config.speed  # upper bound on travel
        nxt = state.position + step * np.array(
            [math.cos(state.heading), math.sin(state.heading)]
        )
        for i, g in enumerate(world.goals):
            if i == target or i == ctx.last:
                continue
            if math.hypot(state.position[0] - g.centre[0],
                          state.position[1] - g.centre[1]) < g.radius:
                continue
            if math.hypot(nxt[0] - g.centre[0], nxt[1] - g.centre[1]) < g.radius + 0.1:
                return g.centre
        return None

    def _replan(self, world: World, position: np.ndarray, target: int) -> _Plan:
        goal_centre = world.goals[target].centre
        others = [i for i in range(len(world.goals)) if i != target]
        avoid_c = np.array([world.goals[i].centre for i in others])
        avoid_r = np.full(len(others), world.goal_radius + self.GOAL_AVOID_MARGIN)
        try:
            wps = plan_path(world, position, goal_centre, avoid_c, avoid_r)
        except PlanningError:
            try:  # crowded: give up on goal avoidance before giving up on routing
                wps = plan_path(world, position, goal_centre)
            except PlanningError:
                wps = np.array([goal_centre])  # heuristic last resort
        return _Plan(waypoints=wps, target_goal=target)
