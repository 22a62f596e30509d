import numpy as np
import pytest

from cyclenav.nets import (
    Adam,
    Batch,
    NetConfig,
    NumericsError,
    TrainConfig,
    attention_loss,
    compute_returns,
    forward,
    gradients,
    init_params,
    initial_belief,
    objective,
    rollout_values,
    scale_target,
    zeros_like_params,
)


def tiny_net(memory=True, obs_dim=11):
    return NetConfig(
        obs_dim=obs_dim,
        encoder_widths=(7, 6),
        belief_width=8,
        pred_widths=(5, 4),
        memory=memory,
    )


def random_batch(rng, net, T=3, B=2, mask_all_zero=False, with_resets=True):
    obs = rng.normal(size=(T, B, net.obs_dim))
    prev_actions = rng.integers(0, net.n_actions, size=(T, B))
    actions = rng.integers(0, net.n_actions, size=(T, B))
    rewards = rng.normal(size=(T, B))
    resets = np.zeros((T, B))
    if with_resets and T >= 3:
        resets[2, 0] = 1.0  # an episode boundary inside the unroll
    targets = rng.uniform(0, 1, size=(T, B, 2))
    mask = np.zeros((T, B)) if mask_all_zero else rng.integers(0, 2, size=(T, B)).astype(float)
    return Batch(
        obs=obs,
        prev_actions=prev_actions,
        actions=actions,
        rewards=rewards,
        resets=resets,
        targets=targets,
        target_mask=mask,
        belief0=rng.normal(size=(B, net.belief_width)) * 0.3,
        bootstrap=rng.normal(size=B),
    )


def random_params(net, rng, scale=0.4):
    """Fully random weights *and* biases: zero-bias inits can park relu
    preactivations exactly on their kink, which breaks finite differences."""
    return {k: rng.normal(scale=scale, size=v.shape) for k, v in init_params(net, rng).items()}


def assert_kink_clearance(params, batch, net, margin=1e-4):
    """The FD oracle is only valid away from relu/L1 kinks; verify that."""
    h = batch.belief0
    T = batch.actions.shape[0]
    for t in range(T):
        h = h * (1.0 - batch.resets[t][:, None])
        h, _, _, pred, cache = forward(
            params, h, batch.obs[t], batch.prev_actions[t], net, want_cache=True
        )
        e1 = cache.x @ params["enc1_w"] + params["enc1_b"]
        e2 = cache.a1 @ params["enc2_w"] + params["enc2_b"]
        q1 = cache.pin @ params["pred1_w"] + params["pred1_b"]
        q2 = cache.p1 @ params["pred2_w"] + params["pred2_b"]
        for arr in (e1, e2, q1, q2, pred - batch.targets[t]):
            assert np.abs(arr).min() > margin, "kink too close to zero for FD"


def fd_check(params, batch, cfg, net, rel=1e-4, absol=1e-6):
    """Central finite differences against the analytic gradients."""
    assert_kink_clearance(params, batch, net)
    values = rollout_values(params, batch, net)
    returns, advantages = compute_returns(values, batch, cfg)
    _, grads, _ = objective(params, batch, cfg, net, returns, advantages)
    eps = 1e-6
    worst = 0.0
    for key, w in params.items():
        flat = w.ravel()
        g_flat = grads[key].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _, _ = objective(params, batch, cfg, net, returns, advantages, want_grads=False)
            flat[i] = orig - eps
            lm, _, _ = objective(params, batch, cfg, net, returns, advantages, want_grads=False)
            flat[i] = orig
            fd = (lp - lm) / (2 * eps)
            err = abs(fd - g_flat[i])
            tol = max(rel * abs(fd), absol)
            assert err <= tol, f"{key}[{i}]: analytic {g_flat[i]}, fd {fd}, err {err}"
            worst = max(worst, err / max(abs(fd), 1e-12))
    return worst


@pytest.mark.parametrize("memory", [True, False])
def test_gradients_match_finite_differences(memory):
    rng = np.random.default_rng(0)
    net = tiny_net(memory=memory)
    params = random_params(net, rng)
    batch = random_batch(rng, net)
    cfg = TrainConfig(unroll=3, attention_weight=3.0, entropy_bonus=0.02)
    fd_check(params, batch, cfg, net)


def test_gradients_masked_attention_path():
    # all target masks zero: prediction-head weight gradients must vanish
    rng = np.random.default_rng(0)
    net = tiny_net()
    params = random_params(net, rng)
    batch = random_batch(rng, net, mask_all_zero=True)
    cfg = TrainConfig(unroll=3, attention_weight=10.0)
    _, grads, _, _, _ = gradients(params, batch, cfg, net)
    for k in ("pred3_w", "pred3_b", "pred2_w", "pred2_b"):
        assert np.allclose(grads[k], 0.0), f"{k} should have zero gradient when masked"


def test_attention_weight_zero_detaches_prediction_head():
    rng = np.random.default_rng(9)
    net = tiny_net()
    params = init_params(net, rng)
    batch = random_batch(rng, net)
    cfg = TrainConfig(unroll=3, attention_weight=0.0)
    _, grads, _, _, _ = gradients(params, batch, cfg, net)
    for k in ("pred1_w", "pred1_b", "pred2_w", "pred2_b", "pred3_w", "pred3_b"):
        assert np.allclose(grads[k], 0.0)


def test_forward_zero_weights_uniform_policy():
    net = tiny_net()
    params = {k: np.zeros_like(v) for k, v in init_params(net, np.random.default_rng(0)).items()}
    obs = np.random.default_rng(1).normal(size=(3, net.obs_dim))
    h, logits, value, pred = forward(params, initial_belief(net, 3), obs, [0, 1, 2], net)
    assert np.allclose(logits, logits[:, :1])  # all equal -> uniform policy
    assert np.allclose(value, 0.0)
    assert np.all((pred >= 0) & (pred <= 1))


def test_forward_deterministic_and_shapes():
    rng = np.random.default_rng(3)
    net = NetConfig()  # full-size: belief 128, 64 rays
    params = init_params(net, rng)
    obs = np.random.default_rng(4).normal(size=(1, net.obs_dim))
    out1 = forward(params, initial_belief(net), obs, [2], net)
    out2 = forward(params, initial_belief(net), obs, [2], net)
    for a, b in zip(out1, out2):
        assert np.array_equal(a, b)
    h, logits, value, pred = out1
    assert h.shape == (1, 128)
    assert logits.shape == (1, 5)
    assert value.shape == (1,)
    assert pred.shape == (1, 2)


def test_forward_rejects_nan():
    net = tiny_net()
    params = init_params(net, np.random.default_rng(0))
    obs = np.full((1, net.obs_dim), np.nan)
    with pytest.raises(NumericsError):
        forward(params, initial_belief(net), obs, [0], net)


def test_attention_loss_values():
    assert attention_loss(np.array([0.3, 0.4]), np.array([0.3, 0.4]), 1) == 0.0
    assert attention_loss(np.array([0.9, 0.9]), np.array([0.1, 0.2]), 0) == 0.0
    assert attention_loss(np.array([0.0, 0.0]), np.array([0.25, 0.5]), 1) == pytest.approx(0.75)


def test_scale_target_clamps():
    assert np.allclose(scale_target(np.array([0.0, 0.0]), 16.0), [0.5, 0.5])
    assert np.allclose(scale_target(np.array([16.0, -16.0]), 16.0), [1.0, 0.0])
    assert np.allclose(scale_target(np.array([100.0, -100.0]), 16.0), [1.0, 0.0])


def test_belief_reset_isolates_episodes():
    rng = np.random.default_rng(11)
    net = tiny_net()
    params = init_params(net, rng)
    obs = rng.normal(size=(1, net.obs_dim))
    # first step of an episode: belief starts at zero regardless of history
    h_fresh, logits_fresh, v_fresh, _ = forward(params, initial_belief(net), obs, [0], net)
    stale = rng.normal(size=(1, net.belief_width))
    h_stale, logits_stale, v_stale, _ = forward(params, stale * 0.0, obs, [0], net)
    assert np.allclose(logits_fresh, logits_stale)
    assert np.allclose(v_fresh, v_stale)


def test_adam_moves_params_and_checks_finiteness():
    rng = np.random.default_rng(13)
    net = tiny_net()
    params = init_params(net, rng)
    grads = {k: np.ones_like(v) for k, v in params.items()}
    before = {k: v.copy() for k, v in params.items()}
    Adam(lr=1e-3).step(params, grads)
    assert any(not np.allclose(before[k], params[k]) for k in params)
    bad = {k: np.full_like(v, np.nan) for k, v in params.items()}
    with pytest.raises(NumericsError):
        Adam(lr=1e-3).step(params, bad)
