"""Scripted stub policies with known cultural-transmission signatures.

These are calibration instruments, not learners: a pure follower should land
near ct 0.75, a follower that replays what it saw near 1, a random walker
near 0. The fidelity stubs (mirror / anti / random-entry) pin the two-option
preference measure at 100% / 0% / ~50%.
"""

from __future__ import annotations

import numpy as np

from .env import Action, N_ACTIONS, ROTATION_DELTA
from .episodes import PrivilegedView
from .expert import ExpertConfig, ExpertController
from .game import CyclicOrder


def _steer_towards(state, point) -> Action:
    to = point - state.position
    desired = np.arctan2(to[1], to[0])
    err = (desired - state.heading + np.pi) % (2 * np.pi) - np.pi
    if abs(err) > ROTATION_DELTA / 2:
        return Action.ROTATE_LEFT if err > 0 else Action.ROTATE_RIGHT
    return Action.FORWARD


class RandomPolicy:
    """Uniform random actions."""

    def reset(self, built, task, rng):
        self.rng = rng

    def act(self, obs, view: PrivilegedView) -> Action:
        return Action(int(self.rng.integers(N_ACTIONS)))


class FollowerPolicy:
    """Walk the expert's breadcrumb trail; act randomly when alone.

    Trail-following retraces the demonstrated path through the same goals in
    the same order; chasing the expert's current position would cut chords
    across the cycle and miss the goals entirely. A small lookahead smooths
    steering, and when the lag grows too large the oldest crumbs are dropped
    so the follower shortcuts back onto the recent path.
    """

    CRUMB_REACHED = 0.5
    LOOKAHEAD = 2
    MAX_TRAIL = 60      # ~12 units of lag before shortcutting
    TRIMMED_TRAIL = 35

    def reset(self, built, task, rng):
        self.rng = rng
        self.trail: list[np.ndarray] = []

    def act(self, obs, view: PrivilegedView) -> Action:
        if view.expert_state is None:
            self.trail = []                      # alone: no trail to follow
            return Action(int(self.rng.integers(N_ACTIONS)))
        self.trail.append(view.expert_state.position.copy())
        if len(self.trail) > self.MAX_TRAIL:
            self.trail = self.trail[-self.TRIMMED_TRAIL:]
        me = view.self_state
        while self.trail and np.linalg.norm(self.trail[0] - me.position) < self.CRUMB_REACHED:
            self.trail.pop(0)
        if not self.trail:
            return Action.NOOP                   # on the expert's heels
        target = self.trail[min(self.LOOKAHEAD, len(self.trail) - 1)]
        return _steer_towards(me, target)


class _CycleWalker:
    """Shared machinery: walk an explicit goal sequence with the expert's planner."""

    def __init__(self):
        self._controller = None

    def _walk(self, view: PrivilegedView, order: CyclicOrder, direction: int,
              rng: np.random.Generator) -> Action:
        if self._controller is None or self._controller.order is not order \
                or self._controller.direction != direction:
            self._controller = ExpertController(ExpertConfig(), order, direction, rng)
        return self._controller.act(view.world, view.self_state, view.ctx)


class ReplayPolicy(_CycleWalker):
    """Follow while the expert is visible; once it disappears, keep walking the
    cycle in the direction the expert demonstrated."""

    def reset(self, built, task, rng):
        super().__init__()
        self.rng = rng
        self.follow = FollowerPolicy()
        self.follow.reset(built, task, rng)
        self.seen_direction: int | None = None

    def act(self, obs, view: PrivilegedView) -> Action:
        if view.expert_state is not None:
            self.seen_direction = view.expert_direction  # demonstrated live
            return self.follow.act(obs, view)
        if self.seen_direction is None:
            return Action(int(self.rng.integers(N_ACTIONS)))
        return self._walk(view, view.game.order, self.seen_direction, self.rng)


class MirrorFidelityPolicy(ReplayPolicy):
    """Alias used by the two-option analysis: follow, then reproduce."""


class AntiFidelityPolicy(_CycleWalker):
    """Walk the opposite direction to the demonstrated one (worst-case fidelity)."""

    def reset(self, built, task, rng):
        super().__init__()
        self.rng = rng

    def act(self, obs, view: PrivilegedView) -> Action:
        direction = -(view.expert_direction or 1)
        return self._walk(view, view.game.order, direction, self.rng)


class RandomEntryPolicy:
    """Navigate to uniformly random goals (never the one just entered)."""

    def reset(self, built, task, rng):
        self.rng = rng
        self.target: int | None = None

    def act(self, obs, view: PrivilegedView) -> Action:
        world = view.world
        if self.target is None or self.target == view.ctx.last:
            choices = [i for i in range(len(world.goals)) if i != view.ctx.last]
            self.target = int(self.rng.choice(choices))
        return _steer_towards(view.self_state, world.goals[self.target].centre)
