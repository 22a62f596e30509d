"""Episode engine: steps avatars through a built task, applies the reward
rules on goal entry, advances the dropout schedule and optionally records a
full step-by-step trace.

Avatars never collide with each other. A hidden expert is frozen in place and
excluded from every observation; all of its effects on the episode vanish
while hidden. Episodes are independent: one episode is advanced by exactly
one caller at a time and all randomness flows through generators derived from
the task seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import Action, AvatarState, Observation, goal_index_at, move_avatar, sense
from .expert import ExpertController, dropout_advance, initial_visibility
from .game import RewardContext, reward_for_entry
from .tasks import BuiltTask, TaskSpec, build_task, episode_rng, expert_direction_for
from .worlds import AVATAR_RADIUS


class EpisodeTerminated(Exception):
    """A step was requested on a finished episode."""


@dataclass
class PrivilegedView:
    """What scripted policies may see; the learning agent uses only the
    Observation. expert_state is None whenever the expert is hidden/absent."""

    world: object
    game: object
    t: int
    e: int
    self_state: AvatarState
    ctx: RewardContext
    expert_state: AvatarState | None
    expert_direction: int | None


@dataclass
class StepRecord:
    t: int
    poses: dict[str, tuple[float, float, float]]
    actions: dict[str, int]
    rewards: dict[str, int]
    e: int
    events: list[tuple[str, int, int]]          # (player, goal index, reward)


@dataclass
class EpisodeResult:
    scores: dict[str, int]
    steps: list[StepRecord]
    built: BuiltTask
    expert_direction: int | None
    complete: bool = True

    def reward_sequence(self, player: str) -> list[int]:
        return [s.rewards[player] for s in self.steps]

    def entry_events(self, player: str) -> list[tuple[int, int, int]]:
        """(t, goal, reward) entries for one player."""
        out = []
        for s in self.steps:
            for who, g, r in s.events:
                if who == player:
                    out.append((s.t, g, r))
        return out


def spawn_avatar(built: BuiltTask, rng: np.random.Generator, role: str) -> AvatarState:
    """Random free pose: outside blocking discs and outside every goal, so the
    first goal visit is always an outside-to-inside transition."""
    w = built.world
    for _ in range(1000):
        pos = rng.uniform(AVATAR_RADIUS, w.size - AVATAR_RADIUS, size=2)
        if len(w.v_centres) and np.any(
            np.linalg.norm(w.v_centres - pos, axis=1) < w.v_radii + AVATAR_RADIUS
        ):
            continue
        if goal_index_at(w, pos) is not None:
            continue
        return AvatarState(
            position=pos, heading=float(rng.uniform(0, 2 * np.pi)), role=role
        )
    raise RuntimeError("could not find a free spawn position")


class Episode:
    """One playable episode. Use step() manually or run() to completion.

    agent_policy: object with reset(built, task, rng) and
    act(obs: Observation, view: PrivilegedView) -> Action, or None for an
    expert-solo episode. The expert is scripted unless `expert_override` is
    given (an object with pose_at(t) -> (x, y, heading), e.g. a replayed
    recording, which bypasses kinematics and collision entirely).
    """

    def __init__(
        self,
        task: TaskSpec,
        agent_policy=None,
        built: BuiltTask | None = None,
        expert_override=None,
        visibility_fn=None,
        record: bool = True,
        include_agent: bool | None = None,
    ):
        self.task = task
        self.built = built if built is not None else build_task(task)
        self.record = record
        self.visibility_fn = visibility_fn
        self.n_steps = task.episode_length

        spawn_rng = episode_rng(task, "spawn")
        self.players: dict[str, AvatarState] = {}
        self.agent_policy = agent_policy
        # include_agent=True without a policy: actions are fed to step() by
        # an external driver (the batched training collector)
        if include_agent is None:
            include_agent = agent_policy is not None
        if include_agent:
            self.players["agent"] = spawn_avatar(self.built, spawn_rng, "agent")
        self.expert_override = expert_override
        self.expert_direction: int | None = None
        self.expert: ExpertController | None = None
        if task.has_expert:
            self.expert_direction = expert_direction_for(task)
            if expert_override is not None:
                x, y, h = expert_override.pose_at(0)
                self.players["expert"] = AvatarState(
                    position=np.array([x, y]), heading=h, role="expert"
                )
            else:
                self.players["expert"] = spawn_avatar(self.built, spawn_rng, "expert")
                self.expert = ExpertController(
                    task.expert_config(),
                    self.built.game.order,
                    self.expert_direction,
                    episode_rng(task, "noise"),
                )

        self.contexts = {p: RewardContext() for p in self.players}
        self.prev_rewards = {p: 0.0 for p in self.players}
        self.last_inside = {
            p: goal_index_at(self.built.world, s.position)
            for p, s in self.players.items()
        }
        self.dropout_rng = episode_rng(task, "dropout")
        self.t = 0
        self.e = initial_visibility(task.dropout) if task.has_expert else 0
        if self.visibility_fn is not None:
            self.e = int(self.visibility_fn(0))
        self.terminated = self.n_steps == 0
        self.steps: list[StepRecord] = []
        if agent_policy is not None:
            agent_policy.reset(self.built, task, episode_rng(task, "policy"))

    @property
    def scores(self) -> dict[str, int]:
        return {p: s.score for p, s in self.players.items()}

    def observe_agent(self) -> Observation:
        agent = self.players["agent"]
        others = [s for p, s in self.players.items() if p != "agent"]
        return sense(
            self.built.world, agent, others, self.e, self.prev_rewards["agent"]
        )

    def _view(self, player: str) -> PrivilegedView:
        expert_state = None
        if "expert" in self.players and self.e == 1:
            expert_state = self.players["expert"]
        return PrivilegedView(
            world=self.built.world,
            game=self.built.game,
            t=self.t,
            e=self.e,
            self_state=self.players[player],
            ctx=self.contexts[player],
            expert_state=expert_state,
            expert_direction=self.expert_direction,
        )

    def step(self, agent_action: Action | None = None,
             expert_action: Action | None = None) -> dict[str, int]:
        """Advance one step; returns this step's rewards per player.

        agent_action overrides the policy (required in external-driver mode);
        expert_action overrides the scripted controller (live human play).
        A hidden expert neither moves nor scores either way.
        """
        if self.terminated:
            raise EpisodeTerminated(f"episode already finished at t={self.t}")
        world = self.built.world
        actions: dict[str, Action] = {}
        if "agent" in self.players:
            if agent_action is not None:
                actions["agent"] = agent_action
            elif self.agent_policy is not None:
                actions["agent"] = self.agent_policy.act(
                    self.observe_agent(), self._view("agent")
                )
            else:
                raise ValueError(
                    "episode has an externally driven agent; pass agent_action"
                )
        if "expert" in self.players and self.expert_override is None and self.e == 1:
            if expert_action is not None:
                actions["expert"] = expert_action
            else:
                actions["expert"] = self.expert.act(
                    world, self.players["expert"], self.contexts["expert"]
                )

        rewards = {p: 0 for p in self.players}
        events: list[tuple[str, int, int]] = []
        for player, action in actions.items():
            mult = self.task.expert_speed if player == "expert" else 1.0
            self.players[player] = move_avatar(
                world, self.players[player], action, mult
            )
        if self.expert_override is not None and self.e == 1:
            x, y, h = self.expert_override.pose_at(self.t)
            st = self.players["expert"]
            st.position = np.array([x, y])
            st.heading = h

        for player, state in self.players.items():
            if player == "expert" and self.e == 0:
                continue  # frozen while hidden: no movement, no scoring
            inside = goal_index_at(world, state.position)
            if inside is not None and inside != self.last_inside[player]:
                r, ctx = reward_for_entry(
                    self.contexts[player], inside, self.built.game.order
                )
                self.contexts[player] = ctx
                state.score += r
                rewards[player] = r
                events.append((player, inside, r))
            self.last_inside[player] = inside

        if self.record:
            self.steps.append(
                StepRecord(
                    t=self.t,
                    poses={
                        p: (float(s.position[0]), float(s.position[1]), float(s.heading))
                        for p, s in self.players.items()
                    },
                    actions={p: int(a) for p, a in actions.items()},
                    rewards=dict(rewards),
                    e=self.e,
                    events=events,
                )
            )
        self.prev_rewards = {p: float(r) for p, r in rewards.items()}
        self.t += 1
        if self.t >= self.n_steps:
            self.terminated = True
        elif self.visibility_fn is not None:
            self.e = int(self.visibility_fn(self.t))
        elif "expert" in self.players:
            self.e = dropout_advance(
                self.task.dropout, self.e, self.t, self.n_steps, self.dropout_rng
            )
        return rewards

    def run(self) -> EpisodeResult:
        while not self.terminated:
            self.step()
        return EpisodeResult(
            scores=self.scores,
            steps=self.steps,
            built=self.built,
            expert_direction=self.expert_direction,
        )


def run_episode(task: TaskSpec, agent_policy=None, **kwargs) -> EpisodeResult:
    return Episode(task, agent_policy=agent_policy, **kwargs).run()
