"""Actor-learner training loop.

A single collector steps a fleet of episodes in lockstep, batching the
network forward pass across lanes; the learner applies one gradient update
per collected unroll. Beliefs are carried across unroll boundaries within an
episode and zeroed at episode starts. With one actor and fixed seeds the
whole run is deterministic.

Ablation names follow the M/E/D/AL convention with an optional randomisation
suffix: "MEDAL" (all ingredients, fixed task parameters), "M----" (no expert),
"-EDAL" (no memory), "MED--" (no attention loss), "ME-AL" (no dropout),
"MEDAL-ADR" (adaptive ranges), "MEDAL--DR" (uniform over full ranges),
"MEDAL----" (fixed at the range endpoints).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .adr import ADRState, push_metric, reference_config, sample_task_params, update_boundaries
from .ct import run_ct_eval
from .env import Action, N_ACTIONS, encode_observation
from .episodes import Episode
from .expert import NO_DROPOUT, probabilistic_dropout, speed_units_to_multiplier
from .nets import (
    Adam,
    Batch,
    NetConfig,
    NumericsError,
    TrainConfig,
    forward,
    gradients,
    action_macro,
    init_params,
    initial_belief,
    scale_target,
)
from .tasks import TRAINING_SEED_BOUND, TaskSpec
from .worlds import WorldParams


@dataclass(frozen=True)
class AblationFlags:
    memory: bool = True
    expert: bool = True
    dropout: bool = True
    attention_loss: bool = True
    randomisation: str = "fixed"   # fixed | adr | uniform | endpoints


def parse_ablation(name: str) -> AblationFlags:
    """Parse an M/E/D/AL(+suffix) ablation name into flags."""
    s = name.replace("–", "-").replace("—", "-").strip()
    if s.endswith("-ADR"):
        base, suffix = s[:-4], "ADR"
    elif s.endswith("--DR"):
        base, suffix = s[:-4], "-DR"
    elif s.endswith("----") and len(s) > 5:
        base, suffix = s[:-4], "---"
    else:
        base, suffix = s, ""
    if len(base) != 5:
        raise ValueError(f"cannot parse ablation name {name!r}")
    memory = base[0] == "M"
    expert = base[1] == "E"
    dropout = base[2] == "D"
    attention = base[3:5] == "AL"
    randomisation = {"": "fixed", "ADR": "adr", "-DR": "uniform", "---": "endpoints"}[suffix]
    if not expert:
        dropout = False
        attention = False
    return AblationFlags(memory, expert, dropout, attention, randomisation)


@dataclass(frozen=True)
class TrainSetup:
    """Desk-scale training configuration (world/task side)."""

    ablation: str = "MEDAL"
    world_size: float = 16.0
    n_goals: int = 4
    episode_length: int = 900
    expert_speed_mult: float = 1.0
    expert_noise: float = 0.0
    dropout_p: float | None = None          # default 10 / episode_length
    budget_steps: int = 2_000_000
    seed: int = 0
    eval_every: int = 50_000
    eval_tasks: int = 4
    adr_update_every: int = 32              # completed tasks per boundary update
    adr_p_boundary: float = 0.5

    def effective_dropout_p(self) -> float:
        # reference per-step toggle rate: 20 toggles per 1800-step episode
        return self.dropout_p if self.dropout_p is not None else 20.0 / 1800.0


class TaskSampler:
    """Draws training TaskSpecs according to the randomisation mode.

    ADR-mode samples a parameter vector from the controller and remembers the
    pin tag so finished tasks can push their ct measurement.
    """

    def __init__(self, setup: TrainSetup, flags: AblationFlags, rng: np.random.Generator,
                 adr_state: ADRState | None = None):
        self.setup = setup
        self.flags = flags
        self.rng = rng
        self.adr_state = adr_state
        if flags.randomisation in ("adr",) and adr_state is None:
            raise ValueError("adr mode needs an ADRState")

    def _seed(self) -> int:
        return int(self.rng.integers(TRAINING_SEED_BOUND))

    def _task_from_lambda(self, lam: np.ndarray) -> TaskSpec:
        ws, h_d, v_d, amp_units, freq, bot_speed, drop_p = lam
        world = WorldParams(
            world_size=float(ws),
            n_goals=self.setup.n_goals,
            v_obstacle_density=float(v_d),
            h_obstacle_density=float(h_d),
            terrain_amplitude=max(0.0, (float(amp_units) - 10.0) / 10.0),
            terrain_frequency=float(freq),
            seed=self._seed(),
        )
        scheme = (
            probabilistic_dropout(float(drop_p)) if self.flags.dropout else NO_DROPOUT
        )
        return TaskSpec(
            world=world,
            seed=self._seed(),
            expert_speed=speed_units_to_multiplier(float(bot_speed)),
            expert_noise=self.setup.expert_noise,
            dropout=scheme,
            episode_length=self.setup.episode_length,
            has_expert=self.flags.expert,
        )

    def sample(self) -> tuple[TaskSpec, tuple[int, str] | None]:
        mode = self.flags.randomisation
        if mode == "fixed":
            world = WorldParams(
                world_size=self.setup.world_size,
                n_goals=self.setup.n_goals,
                seed=self._seed(),
            )
            scheme = (
                probabilistic_dropout(self.setup.effective_dropout_p())
                if self.flags.dropout
                else NO_DROPOUT
            )
            return (
                TaskSpec(
                    world=world,
                    seed=self._seed(),
                    expert_speed=self.setup.expert_speed_mult,
                    expert_noise=self.setup.expert_noise,
                    dropout=scheme,
                    episode_length=self.setup.episode_length,
                    has_expert=self.flags.expert,
                ),
                None,
            )
        if mode == "adr":
            lam, pinned = sample_task_params(self.adr_state, self.rng)
            return self._task_from_lambda(lam), pinned
        ref = reference_config(episode_length=self.setup.episode_length)
        if mode == "uniform":
            lam = np.array([
                self.rng.uniform(p.hard_min, p.hard_max) for p in ref.params
            ])
        elif mode == "endpoints":
            lam = np.array([p.hard_max for p in ref.params])
        else:
            raise ValueError(f"unknown randomisation mode {mode}")
        return self._task_from_lambda(lam), None

    def eval_task(self) -> TaskSpec:
        """A CT-eval task from the training distribution, always with expert."""
        task, _ = self.sample()
        return replace(task, has_expert=True)


class NetPolicy:
    """Wrap network parameters as an episode policy (stochastic by default).

    action_repeat holds each decision for that many env steps, matching the
    cadence the network was trained at; the belief only advances on decision
    steps.
    """

    def __init__(self, params: dict, net: NetConfig, greedy: bool = False,
                 action_repeat: int = 1):
        self.params = params
        self.net = net
        self.greedy = greedy
        self.action_repeat = action_repeat

    def reset(self, built, task, rng):
        self.rng = rng
        self.belief = initial_belief(self.net)
        self.prev_action = int(Action.NOOP)
        self._held = []
        self._reward_acc = 0.0

    def act(self, obs, view) -> Action:
        self._reward_acc += obs.prev_reward
        if self._held:
            return Action(self._held.pop(0))
        vec = encode_observation(obs)[None, :]
        vec[0, -1] = self._reward_acc     # reward over the whole held window
        self._reward_acc = 0.0
        self.belief, logits, _, _ = forward(
            self.params, self.belief, vec, [self.prev_action], self.net
        )
        if self.greedy:
            a = int(np.argmax(logits[0]))
        else:
            z = logits[0] - logits[0].max()
            p = np.exp(z)
            p /= p.sum()
            a = int(self.rng.choice(N_ACTIONS, p=p))
        self.prev_action = a
        seq = action_macro(self.action_repeat, a)
        self._held = seq[1:]
        return Action(seq[0])


@dataclass
class _Lane:
    episode: Episode
    pinned: tuple[int, str] | None
    prev_action: int = int(Action.NOOP)
    needs_reset: bool = True      # zero the belief before this lane's next step
    window_reward: float = 0.0    # reward accumulated over the last decision


class VecCollector:
    """Lockstep episode fleet producing time-major unroll batches."""

    def __init__(self, sampler: TaskSampler, net: NetConfig, tconfig: TrainConfig,
                 action_rng: np.random.Generator, on_task_done=None):
        self.sampler = sampler
        self.net = net
        self.tconfig = tconfig
        self.action_rng = action_rng
        self.on_task_done = on_task_done
        self.n = tconfig.batch_envs
        self.lanes = [self._new_lane() for _ in range(self.n)]
        self.beliefs = initial_belief(net, self.n)
        self.episode_scores: list[float] = []
        self.env_steps = 0

    def _new_lane(self) -> _Lane:
        task, pinned = self.sampler.sample()
        ep = Episode(task, include_agent=True, record=False)
        return _Lane(episode=ep, pinned=pinned)

    def _observe(self, lane: _Lane):
        return lane.episode.observe_agent()

    def collect(self, params: dict) -> tuple[Batch, dict]:
        T, B = self.tconfig.unroll, self.n
        net = self.net
        obs_arr = np.zeros((T, B, net.obs_dim))
        prev_actions = np.zeros((T, B), dtype=int)
        actions = np.zeros((T, B), dtype=int)
        rewards = np.zeros((T, B))
        resets = np.zeros((T, B))
        raw_targets = np.full((T, B, 2), 0.0)
        raw_mask = np.zeros((T, B))
        belief0 = self.beliefs.copy()

        for t in range(T):
            for b, lane in enumerate(self.lanes):
                if lane.needs_reset:
                    resets[t, b] = 1.0
                    self.beliefs[b] = 0.0
                    lane.needs_reset = False
                obs = self._observe(lane)
                vec = encode_observation(obs)
                # the reward channel covers the whole held-action window, not
                # just the final env step; reward feedback is how the agent
                # can tell the rewarding direction apart
                vec[-1] = lane.window_reward
                obs_arr[t, b] = vec
                prev_actions[t, b] = lane.prev_action
                if obs.avatar_target is not None:
                    raw_mask[t, b] = 1.0
                    raw_targets[t, b] = scale_target(
                        obs.avatar_target, lane.episode.built.world.size
                    )
            self.beliefs, logits, _, _ = forward(
                params, self.beliefs, obs_arr[t], prev_actions[t], net
            )
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            u = self.action_rng.random((B, 1))
            acts = (p.cumsum(axis=1) < u).sum(axis=1)
            acts = np.minimum(acts, N_ACTIONS - 1)
            for b, lane in enumerate(self.lanes):
                a = int(acts[b])
                actions[t, b] = a
                # expand the decision into its macro; a decision never
                # leaks into the next episode
                for prim in self.tconfig.macro_for(a):
                    step_rewards = lane.episode.step(agent_action=Action(prim))
                    rewards[t, b] += step_rewards.get("agent", 0)
                    self.env_steps += 1
                    if lane.episode.terminated:
                        self.episode_scores.append(lane.episode.scores.get("agent", 0))
                        if self.on_task_done is not None:
                            self.on_task_done(lane.episode.task, lane.pinned)
                        self.lanes[b] = self._new_lane()
                        break
                if not self.lanes[b].needs_reset:
                    self.lanes[b].prev_action = a
                    self.lanes[b].window_reward = rewards[t, b]

        # attention targets may point n steps ahead of the prediction step
        n_off = self.tconfig.attention_offset
        if n_off:
            targets = np.zeros_like(raw_targets)
            mask = np.zeros_like(raw_mask)
            if n_off < T:
                targets[: T - n_off] = raw_targets[n_off:]
                mask[: T - n_off] = raw_mask[n_off:]
                # a target from a different episode is meaningless
                for dt in range(1, n_off + 1):
                    mask[: T - dt] *= 1.0 - resets[dt:]
        else:
            targets, mask = raw_targets, raw_mask
        if self.tconfig.target_noise > 0:
            noise = self.action_rng.normal(0.0, self.tconfig.target_noise, targets.shape)
            targets = np.clip(targets + mask[..., None] * noise, 0.0, 1.0)

        bootstrap = np.zeros(B)
        live = [b for b, lane in enumerate(self.lanes) if not lane.needs_reset]
        if live:  # episode boundaries contribute no bootstrap value
            next_obs = []
            for b in live:
                vec = encode_observation(self._observe(self.lanes[b]))
                vec[-1] = self.lanes[b].window_reward
                next_obs.append(vec)
            next_obs = np.stack(next_obs)
            _, _, v, _ = forward(
                params,
                self.beliefs[live],
                next_obs,
                [self.lanes[b].prev_action for b in live],
                net,
            )
            bootstrap[live] = v

        batch = Batch(
            obs=obs_arr,
            prev_actions=prev_actions,
            actions=actions,
            rewards=rewards,
            resets=resets,
            targets=targets,
            target_mask=mask,
            belief0=belief0,
            bootstrap=bootstrap,
        )
        stats = {"episode_scores": self.episode_scores}
        self.episode_scores = []
        return batch, stats


@dataclass
class TrainResult:
    params: dict
    metrics: list[dict]
    net: NetConfig
    adr_state: ADRState | None = None
    env_steps: int = 0


def train(
    setup: TrainSetup,
    tconfig: TrainConfig | None = None,
    net: NetConfig | None = None,
    checkpoint_path: str | None = None,
    progress: bool = False,
) -> TrainResult:
    """Train a policy under the given ablation; returns params and metrics log.

    Metrics rows carry env_steps, mean episode score since the last row, the
    training ct measured on freshly sampled tasks, loss, and (in ADR mode) the
    current boundary ranges as JSON.
    """
    tconfig = tconfig or TrainConfig()
    tconfig.validate()
    flags = parse_ablation(setup.ablation)
    net = net or NetConfig(memory=flags.memory)
    if net.memory != flags.memory:
        net = replace(net, memory=flags.memory)
    if not flags.attention_loss and tconfig.attention_weight != 0.0:
        tconfig = replace(tconfig, attention_weight=0.0)

    ss = np.random.SeedSequence(setup.seed)
    init_ss, action_ss, task_ss, eval_ss = ss.spawn(4)
    params = init_params(net, np.random.default_rng(init_ss))
    adam = Adam(lr=tconfig.learning_rate)

    adr_state = None
    if flags.randomisation == "adr":
        adr_state = reference_config(
            p_boundary=setup.adr_p_boundary, episode_length=setup.episode_length
        )
    sampler = TaskSampler(setup, flags, np.random.default_rng(task_ss), adr_state)

    tasks_done = 0
    pending_ct_tasks: list[tuple[TaskSpec, tuple[int, str]]] = []

    def on_task_done(task: TaskSpec, pinned):
        nonlocal tasks_done
        tasks_done += 1
        if pinned is not None:
            pending_ct_tasks.append((task, pinned))

    collector = VecCollector(
        sampler, net, tconfig, np.random.default_rng(action_ss),
        on_task_done=on_task_done,
    )

    metrics: list[dict] = []
    next_eval = setup.eval_every
    updates = 0
    window_scores: list[float] = []
    eval_rng = np.random.default_rng(eval_ss)
    t_start = time.time()

    def measure_train_ct() -> tuple[float, float]:
        """(mean ct, mean agent-expert gap under no dropout) on fresh tasks."""
        vals = []
        gaps = []
        for _ in range(setup.eval_tasks):
            task = sampler.eval_task()
            task = replace(task, seed=int(eval_rng.integers(TRAINING_SEED_BOUND)))
            try:
                m = run_ct_eval(
                    lambda: NetPolicy(params, net, greedy=True,
                                      action_repeat=tconfig.action_repeat),
                    task,
                )
                vals.append(m.ct)
            except Exception:
                continue
            ep = Episode(task.with_dropout(NO_DROPOUT),
                         agent_policy=NetPolicy(params, net, greedy=True,
                                                action_repeat=tconfig.action_repeat),
                         record=False)
            total = 0.0
            while not ep.terminated:
                ep.step()
                total += float(np.linalg.norm(
                    ep.players["agent"].position - ep.players["expert"].position))
            gaps.append(total / ep.n_steps)
        return (
            float(np.mean(vals)) if vals else float("nan"),
            float(np.mean(gaps)) if gaps else float("nan"),
        )

    last_parts: dict = {}
    action_counts = np.zeros(N_ACTIONS)
    base_entropy = tconfig.entropy_bonus
    while collector.env_steps < setup.budget_steps:
        batch, stats = collector.collect(params)
        window_scores.extend(stats["episode_scores"])
        action_counts += np.bincount(batch.actions.ravel(), minlength=N_ACTIONS)
        # linear entropy decay keeps exploration up early without freezing
        # the final policy at high temperature
        frac = min(1.0, collector.env_steps / max(setup.budget_steps, 1))
        decayed = base_entropy * (1.0 + (tconfig.entropy_final_fraction - 1.0) * frac)
        step_cfg = replace(tconfig, entropy_bonus=decayed)
        try:
            for _ in range(tconfig.updates_per_batch):
                loss, grads, _, _, last_parts = gradients(params, batch, step_cfg, net)
                adam.step(params, grads, clip=tconfig.grad_clip)
                updates += 1
        except NumericsError:
            if checkpoint_path:
                save_checkpoint(checkpoint_path, params, net, tconfig,
                                collector.env_steps, setup)
            raise

        if adr_state is not None and pending_ct_tasks:
            for task, pinned in pending_ct_tasks:
                try:
                    m = run_ct_eval(
                        lambda: NetPolicy(params, net, greedy=True,
                                          action_repeat=tconfig.action_repeat),
                        replace(task, has_expert=True),
                    )
                    push_metric(adr_state, pinned, m.ct)
                except Exception:
                    continue
            pending_ct_tasks.clear()
            if tasks_done >= setup.adr_update_every:
                update_boundaries(adr_state)
                tasks_done = 0

        if collector.env_steps >= next_eval:
            train_ct, mean_gap = measure_train_ct()
            row = {
                "env_steps": collector.env_steps,
                "updates": updates,
                "loss": float(loss),
                "mean_score": float(np.mean(window_scores)) if window_scores else 0.0,
                "episodes": len(window_scores),
                "train_ct": train_ct,
                "mean_gap": round(mean_gap, 2),
                "policy_entropy": round(last_parts.get("entropy", float("nan")), 4),
                "attention_l1": round(last_parts.get("attention", float("nan")), 4),
                "value_mse": round(last_parts.get("value", float("nan")), 5),
                "action_hist": "|".join(
                    f"{c / max(action_counts.sum(), 1):.2f}" for c in action_counts
                ),
                "elapsed_s": round(time.time() - t_start, 1),
            }
            if adr_state is not None:
                row["adr_ranges"] = json.dumps(adr_state.ranges())
            metrics.append(row)
            if progress:
                print(
                    f"[{setup.ablation} seed={setup.seed}] steps={row['env_steps']} "
                    f"score={row['mean_score']:.2f} ct={row['train_ct']:.3f} "
                    f"gap={row['mean_gap']} loss={row['loss']:.4f} "
                    f"ent={row['policy_entropy']} att={row['attention_l1']} "
                    f"acts={row['action_hist']}", flush=True,
                )
            window_scores = []
            action_counts = np.zeros(N_ACTIONS)
            next_eval += setup.eval_every

    if checkpoint_path:
        save_checkpoint(checkpoint_path, params, net, tconfig, collector.env_steps, setup)
    return TrainResult(
        params=params, metrics=metrics, net=net,
        adr_state=adr_state, env_steps=collector.env_steps,
    )


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, net: NetConfig, tconfig: TrainConfig,
                    env_steps: int, setup: TrainSetup | None = None) -> None:
    """Versioned container: config echo, named tensors, step counter."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "net": asdict(net),
        "train_config": asdict(tconfig),
        "setup": asdict(setup) if setup is not None else None,
        "env_steps": int(env_steps),
    }
    arrays = {f"param/{k}": v for k, v in params.items()}
    np.savez(path, __meta__=json.dumps(meta), **arrays)


def load_checkpoint(path) -> tuple[dict, NetConfig, dict]:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["__meta__"]))
    if meta["format_version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta['format_version']}")
    params = {
        k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")
    }
    net_kwargs = meta["net"]
    net_kwargs["encoder_widths"] = tuple(net_kwargs["encoder_widths"])
    net_kwargs["pred_widths"] = tuple(net_kwargs["pred_widths"])
    net = NetConfig(**net_kwargs)
    return params, net, meta
