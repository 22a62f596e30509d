"""Behavioural and representational analyses of trained (or stub) agents:
recall across contiguous trials, generalisation sweeps with normalised
scores, two-option fidelity, side-by-side trajectory scenarios, linear
probing for expert-presence neurons and goal-occupancy neuron ranking.

All analyses are pure functions of recorded episodes plus seeds: re-running
on the same inputs yields identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ct import UndefinedMetricError, normalised_score
from .episodes import Episode
from .expert import HALF_DROPOUT, NO_DROPOUT
from .game import CyclicOrder
from .tasks import TaskSpec

TRIAL_LENGTH = 900


# ------------------------------------------------------------------ recall

@dataclass(frozen=True)
class RecallReport:
    trial_scores: list[int]          # per 900-step trial; expert in trial 1 only
    n_trials: int
    entries_per_trial: list[int]


def recall_trials(agent_policy, task: TaskSpec, n_trials: int = 2,
                  trial_length: int = TRIAL_LENGTH) -> RecallReport:
    """One long episode of n contiguous trials; the expert is visible during
    trial 1 and hidden afterwards. Nothing is reset at trial boundaries;
    trials only bucket the score."""
    if n_trials < 2:
        raise ValueError("need at least 2 trials")
    long_task = replace(task, episode_length=n_trials * trial_length)
    ep = Episode(
        long_task,
        agent_policy=agent_policy,
        visibility_fn=lambda t: 1 if t < trial_length else 0,
    )
    result = ep.run()
    scores = [0] * n_trials
    entries = [0] * n_trials
    for t, _, r in result.entry_events("agent"):
        k = min(t // trial_length, n_trials - 1)
        scores[k] += r
        entries[k] += 1
    return RecallReport(trial_scores=scores, n_trials=n_trials,
                        entries_per_trial=entries)


# ------------------------------------------------------- two-option fidelity

def completed_cycles(entry_events, order: CyclicOrder) -> list[int]:
    """Directions (+1/-1) of completed correct cycles in an entry stream.

    A completed cycle is n consecutive +1 entries whose goals walk the cycle
    one way (the reward rules guarantee this within a +1 run; verified
    defensively). 0-reward re-entries are ignored; a -1 breaks the run. Laps
    are counted disjointly: 2n consecutive +1s are two cycles.
    """
    n = order.n
    cycles: list[int] = []
    run: list[int] = []
    for _, goal, reward in entry_events:
        if reward == 0:
            continue
        if reward == -1:
            run = []
            continue
        run.append(goal)
        if len(run) == n:
            d = order.direction_of(run[0], run[1])
            if all(order.successor(run[i], d) == run[i + 1] for i in range(n - 1)):
                cycles.append(d)
            run = []
    return cycles


def two_option_preference(
    agent_policy_factory, tasks: list[TaskSpec], episodes_per_direction: int = 1
) -> float | None:
    """Fraction of the agent's completed correct cycles that match the
    demonstrated direction, over each task driven with the expert walking
    sigma and then sigma^-1. None when no cycle was ever completed."""
    matched = 0
    total = 0
    for task in tasks:
        for direction in (+1, -1):
            for k in range(episodes_per_direction):
                t = replace(task, expert_direction=direction,
                            seed=task.seed + 1_000_003 * k)
                ep = Episode(t, agent_policy=agent_policy_factory())
                result = ep.run()
                for d in completed_cycles(result.entry_events("agent"),
                                          result.built.game.order):
                    total += 1
                    if d == direction:
                        matched += 1
    if total == 0:
        return None
    return matched / total


# --------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepCell:
    axis: str
    value: float
    normalised_score: float | None
    ood: bool
    n_episodes: int


def in_distribution(value: float, lo: float, hi: float) -> bool:
    return lo <= value <= hi


def generalisation_sweep(
    agent_policy_factory,
    axis: str,
    grid: list[float],
    base_task: TaskSpec,
    final_ranges: dict[str, tuple[float, float]],
    episodes_per_cell: int = 3,
    half_steps: int = TRIAL_LENGTH,
) -> list[SweepCell]:
    """Normalised score per grid value along one axis (world | game | expert
    subspaces are addressed by named parameters, e.g. "world_size",
    "expert_noise", "crossings"). Each episode runs half_steps with the
    expert then half_steps without (half dropout); the normalised score is
    the agent's full-episode score over the expert's presence-half score.
    Values outside the final training ranges are tagged out-of-distribution.
    """
    cells = []
    for value in grid:
        scores = []
        for k in range(episodes_per_cell):
            task = _apply_axis(base_task, axis, value, k)
            task = replace(task, episode_length=2 * half_steps,
                           dropout=HALF_DROPOUT)
            ep = Episode(task, agent_policy=agent_policy_factory())
            result = ep.run()
            try:
                scores.append(
                    normalised_score(result.scores["agent"], result.scores["expert"])
                )
            except UndefinedMetricError:
                continue
        lo, hi = final_ranges.get(axis, (-np.inf, np.inf))
        cells.append(
            SweepCell(
                axis=axis,
                value=value,
                normalised_score=float(np.mean(scores)) if scores else None,
                ood=not in_distribution(value, lo, hi),
                n_episodes=len(scores),
            )
        )
    return cells


def _apply_axis(task: TaskSpec, axis: str, value: float, k: int) -> TaskSpec:
    seed = task.seed + 7_919 * k
    world = task.world
    if axis == "world_size":
        world = replace(world, world_size=float(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "v_obstacle_density":
        world = replace(world, v_obstacle_density=float(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "h_obstacle_density":
        world = replace(world, h_obstacle_density=float(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "terrain_amplitude":
        world = replace(world, terrain_amplitude=float(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "terrain_frequency":
        world = replace(world, terrain_frequency=float(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "n_goals":
        world = replace(world, n_goals=int(value), seed=world.seed + k)
        return replace(task, world=world, seed=seed)
    if axis == "expert_speed":
        return replace(task, expert_speed=float(value), seed=seed)
    if axis == "expert_noise":
        return replace(task, expert_noise=float(value), seed=seed)
    if axis == "dropout_p":
        from .expert import probabilistic_dropout

        return replace(task, dropout=probabilistic_dropout(float(value)), seed=seed)
    raise ValueError(f"unknown sweep axis {axis!r}")


# ------------------------------------------------- trajectory comparison

SCENARIOS = ("correct", "wrong-halfway", "dropout-halfway", "wrong-then-dropout", "absent")


@dataclass(frozen=True)
class TrajectoryComparison:
    scenario: str
    agent_path: np.ndarray          # (T, 2)
    expert_path: np.ndarray | None  # (T, 2); None for absent
    agent_events: list[tuple[int, int, int]]
    expert_events: list[tuple[int, int, int]]
    expert_visible: np.ndarray      # (T,)
    scores: dict[str, int]
    world: object


class _WrongOrderSchedule:
    """Swaps the expert onto a non-rewarding order for steps >= switch_at."""

    def __init__(self, episode: Episode, switch_at: int):
        self.episode = episode
        self.switch_at = switch_at
        order = episode.built.game.order
        wrong = list(order.perm)
        wrong[1], wrong[2] = wrong[2], wrong[1]
        self.wrong_order = CyclicOrder(tuple(wrong))
        self.applied = False

    def maybe_apply(self):
        if not self.applied and self.episode.t >= self.switch_at \
                and self.episode.expert is not None:
            self.episode.expert.order = self.wrong_order
            self.episode.expert._plan = None
            self.applied = True


def trajectory_compare(task: TaskSpec, agent_policy, scenario: str,
                       half_steps: int = TRIAL_LENGTH) -> TrajectoryComparison:
    """Run one of the five expert-script scenarios and emit aligned paths,
    goal-entry events and visibility marks for plotting."""
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}")
    n_steps = 2 * half_steps
    task = replace(task, episode_length=n_steps)
    if scenario == "absent":
        task = replace(task, has_expert=False)
        ep = Episode(task, agent_policy=agent_policy)
    elif scenario == "correct":
        ep = Episode(task.with_dropout(NO_DROPOUT), agent_policy=agent_policy)
    elif scenario == "dropout-halfway":
        ep = Episode(task.with_dropout(HALF_DROPOUT), agent_policy=agent_policy)
    elif scenario == "wrong-halfway":
        ep = Episode(task.with_dropout(NO_DROPOUT), agent_policy=agent_policy)
        schedule = _WrongOrderSchedule(ep, half_steps)
    else:  # wrong-then-dropout
        ep = Episode(task.with_dropout(HALF_DROPOUT), agent_policy=agent_policy)
        schedule = _WrongOrderSchedule(ep, 0)

    while not ep.terminated:
        if scenario in ("wrong-halfway", "wrong-then-dropout"):
            schedule.maybe_apply()
        ep.step()
    result_steps = ep.steps
    agent_path = np.array([s.poses["agent"][:2] for s in result_steps])
    expert_path = None
    if "expert" in ep.players:
        expert_path = np.array([s.poses["expert"][:2] for s in result_steps])
    events_a = [(s.t, g, r) for s in result_steps for p, g, r in s.events if p == "agent"]
    events_e = [(s.t, g, r) for s in result_steps for p, g, r in s.events if p == "expert"]
    return TrajectoryComparison(
        scenario=scenario,
        agent_path=agent_path,
        expert_path=expert_path,
        agent_events=events_a,
        expert_events=events_e,
        expert_visible=np.array([s.e for s in result_steps]),
        scores=ep.scores,
        world=ep.built.world,
    )


# ------------------------------------------------------ neuron probing

ATTENTION_THRESHOLD = 0.05


@dataclass(frozen=True)
class ProbeResult:
    attention: np.ndarray            # (d,) nonnegative, sums to 1
    social_neurons: list[int]        # attention weight > threshold
    selected_mass: float
    test_accuracy: float
    accuracy_social_randomised: float
    accuracy_complement_randomised: float
    accuracy_all_randomised: float


def probe_social_neurons(
    beliefs: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    train_steps: int = 2000,
    learning_rate: float = 0.05,
) -> ProbeResult:
    """Attention-weighted linear probe for expert presence.

    A softmax attention map over belief neurons multiplies the features
    elementwise before a linear layer and cross-entropy training (adaptive
    moment steps). Social neurons are those with attention weight above 0.05.
    Interventions randomise either the selected neurons or their complement
    with per-neuron normal noise matched to training-set moments.
    """
    beliefs = np.asarray(beliefs, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if beliefs.ndim != 2 or len(beliefs) != len(labels):
        raise ValueError("beliefs (N, d) and labels (N,) must align")
    if len(np.unique(labels)) < 2:
        raise ValueError("labels are single-class; probing is undefined")
    N, d = beliefs.shape
    rng = np.random.default_rng(seed)
    perm = rng.permutation(N)
    n_train = int(round(0.7 * N))
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    X_tr, y_tr = beliefs[train_idx], labels[train_idx]
    X_te, y_te = beliefs[test_idx], labels[test_idx]

    scores = np.zeros(d)
    W = rng.normal(0, 0.01, size=(d, 2))
    b = np.zeros(2)
    m = {k: 0.0 for k in ("s", "W", "b")}
    v = {k: 0.0 for k in ("s", "W", "b")}
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    def forward_probe(X, scores, W, b):
        att = np.exp(scores - scores.max())
        att /= att.sum()
        Z = X * att[None, :]
        logits = Z @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        return att, Z, p

    for step in range(1, train_steps + 1):
        att, Z, p = forward_probe(X_tr, scores, W, b)
        grad_logits = p.copy()
        grad_logits[np.arange(len(y_tr)), y_tr] -= 1.0
        grad_logits /= len(y_tr)
        gW = Z.T @ grad_logits
        gb = grad_logits.sum(axis=0)
        gZ = grad_logits @ W.T
        g_att = np.sum(gZ * X_tr, axis=0)
        g_scores = att * (g_att - float(att @ g_att))
        for key, g in (("s", g_scores), ("W", gW), ("b", gb)):
            m[key] = beta1 * m[key] + (1 - beta1) * g
            v[key] = beta2 * v[key] + (1 - beta2) * g * g
            mh = m[key] / (1 - beta1**step)
            vh = v[key] / (1 - beta2**step)
            upd = learning_rate * mh / (np.sqrt(vh) + eps)
            if key == "s":
                scores = scores - upd
            elif key == "W":
                W = W - upd
            else:
                b = b - upd

    att, _, _ = forward_probe(X_tr, scores, W, b)
    social = [int(i) for i in np.where(att > ATTENTION_THRESHOLD)[0]]

    def accuracy(X):
        _, _, p = forward_probe(X, scores, W, b)
        return float(np.mean(p.argmax(axis=1) == y_te))

    mu = X_tr.mean(axis=0)
    sd = X_tr.std(axis=0) + 1e-12

    def randomised(idx):
        Xr = X_te.copy()
        noise = rng.normal(size=(len(X_te), len(idx)))
        Xr[:, idx] = mu[idx] + noise * sd[idx]
        return Xr

    comp = [i for i in range(d) if i not in social]
    return ProbeResult(
        attention=att,
        social_neurons=social,
        selected_mass=float(att[social].sum()) if social else 0.0,
        test_accuracy=accuracy(X_te),
        accuracy_social_randomised=accuracy(randomised(social)) if social else float("nan"),
        accuracy_complement_randomised=accuracy(randomised(comp)) if comp else float("nan"),
        accuracy_all_randomised=accuracy(randomised(list(range(d)))),
    )


def collect_belief_dataset(
    params, net, task_sampler, n_episodes: int = 200, seed: int = 0
):
    """Step 1 of the probing procedure: run the frozen policy over episodes
    with randomised dropout switch points; collect (belief, expert-present)
    pairs per step, plus inside-goal indicators for goal-neuron ranking."""
    from .env import goal_index_at

    rng = np.random.default_rng(seed)
    beliefs, labels, inside = [], [], []
    for k in range(n_episodes):
        task = task_sampler(rng)
        switch = int(rng.integers(1, task.episode_length))
        policy = _BeliefTap(params, net)
        ep = Episode(task, agent_policy=policy,
                     visibility_fn=lambda t, s=switch: 1 if t < s else 0)
        while not ep.terminated:
            pre_e = ep.e
            ep.step()
            beliefs.append(policy.belief[0].copy())
            labels.append(pre_e)
            inside.append(
                1 if goal_index_at(ep.built.world, ep.players["agent"].position) is not None
                else 0
            )
    return np.array(beliefs), np.array(labels), np.array(inside)


class _BeliefTap:
    """NetPolicy variant that exposes its belief after every step."""

    def __init__(self, params, net):
        from .training import NetPolicy

        self._inner = NetPolicy(params, net)

    def reset(self, built, task, rng):
        self._inner.reset(built, task, rng)

    def act(self, obs, view):
        return self._inner.act(obs, view)

    @property
    def belief(self):
        return self._inner.belief


# ------------------------------------------------- goal-neuron ranking

@dataclass(frozen=True)
class GoalNeuronReport:
    ranked: list[int]
    correlations: np.ndarray
    variances: np.ndarray


def goal_neuron_rank(beliefs: np.ndarray, inside_goal: np.ndarray,
                     top_k: int | None = None) -> GoalNeuronReport:
    """Rank belief neurons by |point-biserial correlation| between activation
    and the inside-goal indicator. Constant neurons correlate 0."""
    X = np.asarray(beliefs, dtype=np.float64)
    y = np.asarray(inside_goal, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("beliefs (N, d) and events (N,) must align")
    xm = X - X.mean(axis=0)
    ym = y - y.mean()
    sx = X.std(axis=0)
    sy = y.std()
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (xm * ym[:, None]).mean(axis=0) / (sx * sy)
    corr = np.nan_to_num(corr, nan=0.0)
    order = np.argsort(-np.abs(corr))
    ranked = [int(i) for i in order]
    if top_k is not None:
        ranked = ranked[:top_k]
    return GoalNeuronReport(ranked=ranked, correlations=corr, variances=X.var(axis=0))
