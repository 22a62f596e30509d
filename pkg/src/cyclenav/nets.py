"""Recurrent policy network in plain numpy with hand-written reverse-mode
gradients.

Architecture: observation encoder (two relu layers) -> gated recurrent cell
(GRU; the belief) -> three heads: policy logits over the five actions, scalar
value, and a sigmoid-bounded 2-vector predicting the co-player's egocentric
position in scaled [0,1] coordinates. The prediction head sees the belief
concatenated with the current action one-hot; its target never enters the
encoder input.

The memoryless ablation swaps the GRU for an equally sized tanh layer with
the same input/output widths and no state carry.

Gradients are computed by truncated backpropagation through time over an
unroll; the training objective (advantage actor-critic with entropy bonus
plus the weighted, visibility-masked L1 attention loss) is differentiated
with returns and advantages held fixed, which is what the finite-difference
oracle checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .env import N_ACTIONS, OBS_DIM


class NumericsError(Exception):
    """A loss or parameter became non-finite."""


def action_macro(action_repeat: int, action: int) -> list[int]:
    """Expand one policy decision into primitive env actions.

    Translations persist for action_repeat steps so exploration covers
    ground; a rotate decision becomes a gentle arc (one rotation, then
    forward), which makes target-tracking expressible as a near-constant
    policy the way simultaneous turn-and-move controls would; noop holds
    half a window.
    """
    if action in (0, 1):                  # forward / backward
        return [action] * action_repeat
    if action == 4:                       # noop
        return [action] * max(1, action_repeat // 2)
    return [action] + [0] * max(0, action_repeat // 2)   # rotate, then forward


@dataclass(frozen=True)
class NetConfig:
    obs_dim: int = OBS_DIM
    encoder_widths: tuple[int, int] = (128, 64)
    belief_width: int = 128
    pred_widths: tuple[int, int] = (32, 64)
    n_actions: int = N_ACTIONS
    memory: bool = True          # False: feed-forward cell of the same width

    @property
    def encoder_in(self) -> int:
        return self.obs_dim + self.n_actions   # observation + previous action


def init_params(config: NetConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """He-scaled initialisation; zero biases. Keys are stable and serialisable."""

    def dense(name, n_in, n_out, scale=None):
        s = scale if scale is not None else np.sqrt(2.0 / n_in)
        return {
            f"{name}_w": rng.normal(0.0, s, size=(n_in, n_out)),
            f"{name}_b": np.zeros(n_out),
        }

    e1, e2 = config.encoder_widths
    h = config.belief_width
    p1, p2 = config.pred_widths
    params: dict[str, np.ndarray] = {}
    params.update(dense("enc1", config.encoder_in, e1))
    params.update(dense("enc2", e1, e2))
    if config.memory:
        # GRU: z (update), r (reset), c (candidate); inputs [x, h]
        for gate in ("z", "r", "c"):
            params.update(dense(f"gru_{gate}", e2 + h, h, scale=1.0 / np.sqrt(e2 + h)))
    else:
        params.update(dense("ff", e2, h, scale=1.0 / np.sqrt(e2)))
    params.update(dense("policy", h, config.n_actions, scale=0.01))
    params.update(dense("value", h, 1, scale=0.01))
    params.update(dense("pred1", h + config.n_actions, p1))
    params.update(dense("pred2", p1, p2))
    params.update(dense("pred3", p2, 2, scale=0.01))
    return params


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def check_finite(params: dict[str, np.ndarray], where: str = "params") -> None:
    for k, v in params.items():
        if not np.all(np.isfinite(v)):
            raise NumericsError(f"non-finite values in {where}[{k}]")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -50, 50)))


@dataclass
class _Cache:
    """Intermediate activations for one step, kept for the backward pass."""

    x: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray = None
    r: np.ndarray = None
    c: np.ndarray = None
    h: np.ndarray = None
    pa: np.ndarray = None
    pin: np.ndarray = None
    p1: np.ndarray = None
    p2: np.ndarray = None
    pred: np.ndarray = None


def forward(
    params: dict[str, np.ndarray],
    belief: np.ndarray,
    obs_vec: np.ndarray,
    prev_action,
    config: NetConfig,
    want_cache: bool = False,
):
    """One step (batched): returns (belief', logits, value, prediction[, cache]).

    belief: (B, H). obs_vec: (B, obs_dim). prev_action: (B,) int action ids.
    All outputs are deterministic functions of the inputs.
    """
    if not np.all(np.isfinite(obs_vec)):
        raise NumericsError("non-finite observation")
    B = obs_vec.shape[0]
    pa = np.zeros((B, config.n_actions))
    pa[np.arange(B), np.asarray(prev_action, dtype=int)] = 1.0
    x = np.concatenate([obs_vec, pa], axis=1)

    a1 = np.maximum(x @ params["enc1_w"] + params["enc1_b"], 0.0)
    a2 = np.maximum(a1 @ params["enc2_w"] + params["enc2_b"], 0.0)

    cache = _Cache(x=x, a1=a1, a2=a2, h_prev=belief, pa=pa)
    if config.memory:
        xh = np.concatenate([a2, belief], axis=1)
        z = _sigmoid(xh @ params["gru_z_w"] + params["gru_z_b"])
        r = _sigmoid(xh @ params["gru_r_w"] + params["gru_r_b"])
        xrh = np.concatenate([a2, r * belief], axis=1)
        c = np.tanh(xrh @ params["gru_c_w"] + params["gru_c_b"])
        h = (1.0 - z) * belief + z * c
        cache.z, cache.r, cache.c, cache.h = z, r, c, h
    else:
        h = np.tanh(a2 @ params["ff_w"] + params["ff_b"])
        cache.h = h

    logits = h @ params["policy_w"] + params["policy_b"]
    value = (h @ params["value_w"] + params["value_b"])[:, 0]

    pin = np.concatenate([h, pa], axis=1)
    p1 = np.maximum(pin @ params["pred1_w"] + params["pred1_b"], 0.0)
    p2 = np.maximum(p1 @ params["pred2_w"] + params["pred2_b"], 0.0)
    pred = _sigmoid(p2 @ params["pred3_w"] + params["pred3_b"])
    cache.pin, cache.p1, cache.p2, cache.pred = pin, p1, p2, pred

    if want_cache:
        return h, logits, value, pred, cache
    return h, logits, value, pred


def initial_belief(config: NetConfig, batch: int = 1) -> np.ndarray:
    return np.zeros((batch, config.belief_width))


def attention_loss(prediction: np.ndarray, target: np.ndarray, expert_visible) -> float:
    """Sum of |prediction - target| where the expert is visible, else zero.

    prediction, target: (..., 2) scaled coordinates; expert_visible: (...)
    bit(s). Hidden steps contribute exactly 0 regardless of the prediction.
    """
    mask = np.asarray(expert_visible, dtype=float)
    diff = np.abs(prediction - np.where(mask[..., None] > 0, target, 0.0))
    return float(np.sum(mask[..., None] * diff))


def scale_target(delta: np.ndarray, world_size: float) -> np.ndarray:
    """Map an egocentric offset to [0,1]^2: (d / w + 1) / 2, clamped."""
    return np.clip((np.asarray(delta) / world_size + 1.0) / 2.0, 0.0, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    unroll: int = 64                  # decision steps per learner update
    discount: float = 0.99            # per decision step
    attention_weight: float = 10.0
    attention_offset: int = 0         # n: predict the target n steps ahead
    target_noise: float = 0.0         # stddev of noise added to targets
    learning_rate: float = 3e-4
    entropy_bonus: float = 0.01
    value_coeff: float = 0.5
    batch_envs: int = 16
    grad_clip: float = 5.0
    action_repeat: int = 4            # env steps a translation decision is held
    updates_per_batch: int = 1        # gradient passes over each fresh unroll
    normalize_advantages: bool = True # standardise advantages per batch
    entropy_final_fraction: float = 0.1  # entropy bonus decays linearly to this

    def macro_for(self, action: int) -> list[int]:
        return action_macro(self.action_repeat, action)

    def validate(self):
        if not 0 < self.discount < 1:
            raise ValueError("discount must be in (0, 1)")
        if self.unroll < 1:
            raise ValueError("unroll must be >= 1")
        if self.action_repeat < 1:
            raise ValueError("action_repeat must be >= 1")
        if self.updates_per_batch < 1:
            raise ValueError("updates_per_batch must be >= 1")


@dataclass
class Batch:
    """An unroll of experience: time-major arrays over (T, B, ...).

    resets[t, b] marks that step t begins a new episode in lane b (the belief
    is zeroed before it). target_mask is the expert-visibility bit used by the
    attention loss; targets hold scaled coordinates (zeros where masked).
    """

    obs: np.ndarray            # (T, B, obs_dim)
    prev_actions: np.ndarray   # (T, B) int
    actions: np.ndarray        # (T, B) int
    rewards: np.ndarray        # (T, B)
    resets: np.ndarray         # (T, B) float 0/1
    targets: np.ndarray        # (T, B, 2)
    target_mask: np.ndarray    # (T, B)
    belief0: np.ndarray        # (B, H) carried belief before step 0
    bootstrap: np.ndarray | None = None   # (B,) value estimate after step T-1


def compute_returns(values: np.ndarray, batch: Batch, config: TrainConfig):
    """Discounted returns within the unroll (reset-aware) and advantages.

    values: (T, B) current value estimates. Returns bootstrap from
    batch.bootstrap after the last step unless a reset follows. These are the
    fixed regression/weighting targets of the differentiable objective.
    """
    T, B = batch.rewards.shape
    returns = np.zeros((T, B))
    nxt = batch.bootstrap if batch.bootstrap is not None else np.zeros(B)
    for t in reversed(range(T)):
        cont = 1.0 - (batch.resets[t + 1] if t + 1 < T else np.zeros(B))
        returns[t] = batch.rewards[t] + config.discount * cont * nxt
        nxt = returns[t]
    advantages = returns - values
    if config.normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return returns, advantages


def unroll_forward(params: dict[str, np.ndarray], batch: Batch, net: NetConfig):
    """Run the whole unroll once; returns (step caches, values (T, B))."""
    T, B = batch.actions.shape
    h = batch.belief0
    caches = []
    values = np.zeros((T, B))
    for t in range(T):
        h = h * (1.0 - batch.resets[t][:, None])
        h, logits, value, pred, cache = forward(
            params, h, batch.obs[t], batch.prev_actions[t], net, want_cache=True
        )
        z = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        caches.append((cache, probs, value, pred))
        values[t] = value
    return caches, values


def objective(
    params: dict[str, np.ndarray],
    batch: Batch,
    config: TrainConfig,
    net: NetConfig,
    returns: np.ndarray,
    advantages: np.ndarray,
    want_grads: bool = True,
    caches=None,
):
    """The scalar training loss and (optionally) its gradients.

    loss = mean_t,b [ -log pi(a) * adv - entropy_bonus * H(pi)
                      + value_coeff * (V - G)^2 ]
           + attention_weight * mean_t,b [ masked L1 ]

    returns/advantages enter as constants: perturbing params changes the loss
    only through the policy, value and prediction outputs, so central finite
    differences on this function match the analytic gradients exactly.
    """
    T, B = batch.actions.shape
    denom = float(T * B)
    if caches is None:
        caches, _ = unroll_forward(params, batch, net)
    loss_pi = loss_v = loss_ent = loss_att = 0.0
    for t in range(T):
        _, probs, value, pred = caches[t]
        logp = np.log(np.maximum(probs, 1e-30))
        a = batch.actions[t]
        loss_pi -= float(np.sum(logp[np.arange(B), a] * advantages[t]))
        loss_ent -= float(np.sum(-np.sum(probs * logp, axis=1)))
        loss_v += float(np.sum((value - returns[t]) ** 2))
        mask = batch.target_mask[t]
        loss_att += float(np.sum(mask[:, None] * np.abs(pred - batch.targets[t])))
    loss = (
        loss_pi / denom
        + config.entropy_bonus * loss_ent / denom
        + config.value_coeff * loss_v / denom
        + config.attention_weight * loss_att / denom
    )
    parts = {
        "policy": loss_pi / denom,
        "entropy": -loss_ent / denom,          # mean policy entropy
        "value": loss_v / denom,
        "attention": loss_att / denom,         # unweighted mean masked L1
    }
    if not np.isfinite(loss):
        bad = [k for k, v in parts.items() if not np.isfinite(v)]
        raise NumericsError(f"non-finite loss terms: {bad}")
    if not want_grads:
        return loss, None, parts

    grads = zeros_like_params(params)
    dh_next = np.zeros_like(batch.belief0)
    for t in reversed(range(T)):
        cache, probs, value, pred = caches[t]
        B_t = np.arange(B)
        a = batch.actions[t]

        # policy head
        one_hot = np.zeros_like(probs)
        one_hot[B_t, a] = 1.0
        dlogits = (probs - one_hot) * advantages[t][:, None] / denom
        # entropy term: d(-H)/dlogits = probs * (logp + H)
        logp = np.log(np.maximum(probs, 1e-30))
        H = -np.sum(probs * logp, axis=1, keepdims=True)
        dlogits += config.entropy_bonus * probs * (logp + H) / denom
        # value head
        dvalue = 2.0 * config.value_coeff * (value - returns[t]) / denom
        # prediction head
        mask = batch.target_mask[t][:, None]
        dpred = config.attention_weight * mask * np.sign(pred - batch.targets[t]) / denom

        dh = dh_next.copy()
        grads["policy_w"] += cache.h.T @ dlogits
        grads["policy_b"] += dlogits.sum(axis=0)
        dh += dlogits @ params["policy_w"].T
        grads["value_w"] += cache.h.T @ dvalue[:, None]
        grads["value_b"] += dvalue.sum(axis=0, keepdims=True)[0]
        dh += dvalue[:, None] @ params["value_w"].T

        # back through prediction MLP (sigmoid out, two relus)
        dp3 = dpred * cache.pred * (1.0 - cache.pred)
        grads["pred3_w"] += cache.p2.T @ dp3
        grads["pred3_b"] += dp3.sum(axis=0)
        dp2 = (dp3 @ params["pred3_w"].T) * (cache.p2 > 0)
        grads["pred2_w"] += cache.p1.T @ dp2
        grads["pred2_b"] += dp2.sum(axis=0)
        dp1 = (dp2 @ params["pred2_w"].T) * (cache.p1 > 0)
        grads["pred1_w"] += cache.pin.T @ dp1
        grads["pred1_b"] += dp1.sum(axis=0)
        dh += (dp1 @ params["pred1_w"].T)[:, : net.belief_width]

        # back through the cell into the encoder and the previous belief
        if net.memory:
            z, r, c, h_prev, a2 = cache.z, cache.r, cache.c, cache.h_prev, cache.a2
            dz = dh * (c - h_prev)
            dc = dh * z
            dh_prev = dh * (1.0 - z)
            dc_pre = dc * (1.0 - c**2)
            grads["gru_c_w"] += np.concatenate([a2, r * h_prev], axis=1).T @ dc_pre
            grads["gru_c_b"] += dc_pre.sum(axis=0)
            dxrh = dc_pre @ params["gru_c_w"].T
            da2 = dxrh[:, : a2.shape[1]]
            drh = dxrh[:, a2.shape[1]:]
            dr = drh * h_prev
            dh_prev += drh * r
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            xh = np.concatenate([a2, h_prev], axis=1)
            grads["gru_z_w"] += xh.T @ dz_pre
            grads["gru_z_b"] += dz_pre.sum(axis=0)
            grads["gru_r_w"] += xh.T @ dr_pre
            grads["gru_r_b"] += dr_pre.sum(axis=0)
            dxh = dz_pre @ params["gru_z_w"].T + dr_pre @ params["gru_r_w"].T
            da2 += dxh[:, : a2.shape[1]]
            dh_prev += dxh[:, a2.shape[1]:]
        else:
            dff = dh * (1.0 - cache.h**2)
            grads["ff_w"] += cache.a2.T @ dff
            grads["ff_b"] += dff.sum(axis=0)
            da2 = dff @ params["ff_w"].T
            dh_prev = np.zeros_like(dh)

        da2 = da2 * (cache.a2 > 0)
        grads["enc2_w"] += cache.a1.T @ da2
        grads["enc2_b"] += da2.sum(axis=0)
        da1 = (da2 @ params["enc2_w"].T) * (cache.a1 > 0)
        grads["enc1_w"] += cache.x.T @ da1
        grads["enc1_b"] += da1.sum(axis=0)

        dh_next = dh_prev * (1.0 - batch.resets[t][:, None])
    return loss, grads, parts


def gradients(
    params: dict[str, np.ndarray], batch: Batch, config: TrainConfig, net: NetConfig
):
    """Compute (loss, grads, returns, advantages) for one unroll.

    Stage 1 runs the network once to get value estimates and freezes returns
    and advantages; stage 2 differentiates the surrogate objective around
    them, reusing the cached activations.
    """
    caches, values = unroll_forward(params, batch, net)
    returns, advantages = compute_returns(values, batch, config)
    loss, grads, parts = objective(
        params, batch, config, net, returns, advantages, caches=caches
    )
    return loss, grads, returns, advantages, parts


def rollout_values(params, batch: Batch, net: NetConfig) -> np.ndarray:
    _, values = unroll_forward(params, batch, net)
    return values


@dataclass
class Adam:
    """Adaptive-moment optimiser over a parameter dict."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             clip: float = 0.0) -> None:
        if clip > 0:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > clip:
                grads = {k: g * (clip / norm) for k, g in grads.items()}
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m.get(k, 0.0) + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v.get(k, 0.0) + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1**self.t)
            vhat = self.v[k] / (1 - self.beta2**self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        check_finite(params, "params after update")
