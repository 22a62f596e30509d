import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyclenav.adr import (
    ADRParam,
    ADRState,
    acting_updates_to_limit,
    push_metric,
    reference_config,
    sample_task_params,
    simulate_adr,
    update_boundaries,
)

REFERENCE_ROWS = {
    # name: (min, initial, max, step)
    "world_size": (20.0, 20.0, 32.0, 1.0),
    "h_obstacle_density": (0.0001, 0.0001, 0.01, 0.0001),
    "v_obstacle_density": (0.0, 0.0, 0.2, 0.0005),
    "terrain_amplitude": (10.0, 10.0, 15.0, 0.1),
    "terrain_frequency": (0.01, 0.01, 0.1, 0.002),
    "bot_speed": (7.0, 11.0, 14.0, 0.1),
    "dropout_p": (2 / 1800, 20 / 1800, 40 / 1800, 2 / 1800),
}


def two_sided_state(p_boundary=0.5):
    return ADRState(
        params=[
            ADRParam("a", 0.0, 10.0, 4.0, 6.0, 1.0),
            ADRParam("b", -5.0, 5.0, 0.0, 0.0, 0.5),
        ],
        p_boundary=p_boundary,
    )


def test_reference_config_matches_table():
    state = reference_config()
    assert len(state.params) == 7
    assert state.th_low == 0.75 and state.th_high == 0.85
    for p in state.params:
        lo, init, hi, step = REFERENCE_ROWS[p.name]
        assert p.hard_min == lo
        assert p.phi_low == init and p.phi_high == init
        assert p.hard_max == hi
        assert p.step == step
        assert p.frozen_low == (init == lo)
        assert p.frozen_high == (init == hi)
    # five one-sided parameters, two two-sided
    assert sum(p.frozen_low for p in state.params) == 5
    assert not any(p.frozen_high for p in state.params)


def test_sampling_without_pinning_is_uniform():
    from scipy.stats import kstest

    state = two_sided_state(p_boundary=0.0)
    rng = np.random.default_rng(0)
    draws = np.array([sample_task_params(state, rng)[0] for _ in range(10_000)])
    assert all(pin is None for _, pin in
               (sample_task_params(state, rng) for _ in range(100)))
    u = (draws[:, 0] - 4.0) / 2.0
    assert kstest(u, "uniform").pvalue > 1e-4
    assert np.all(draws[:, 1] == 0.0)  # degenerate interval stays put


def test_forced_pinning_hits_both_boundaries():
    state = ADRState(params=[ADRParam("a", 0.0, 10.0, 4.0, 6.0, 1.0)], p_boundary=1.0)
    rng = np.random.default_rng(1)
    seen = {"L": 0, "H": 0}
    for _ in range(2000):
        lam, pin = sample_task_params(state, rng)
        assert pin is not None
        i, side = pin
        seen[side] += 1
        assert lam[i] == (4.0 if side == "L" else 6.0)
    assert abs(seen["L"] - 1000) < 3 * np.sqrt(2000 * 0.25)


def test_degenerate_ranges_sample_constant():
    state = ADRState(params=[ADRParam("a", 0.0, 10.0, 5.0, 5.0, 1.0)], p_boundary=0.0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        lam, _ = sample_task_params(state, rng)
        assert lam[0] == 5.0


def test_push_metric_rules():
    state = two_sided_state()
    push_metric(state, (0, "L"), 0.8)
    assert state.queues[(0, "L")] == [0.8]
    push_metric(state, (0, "L"), 0.6)
    assert len(state.queues[(0, "L")]) == 2
    with pytest.raises(KeyError):
        push_metric(state, None, 0.5)
    with pytest.raises(KeyError):
        push_metric(state, (5, "L"), 0.5)


def test_push_to_frozen_side_rejected():
    state = reference_config()
    frozen_idx = next(i for i, p in enumerate(state.params) if p.frozen_low)
    with pytest.raises(KeyError):
        push_metric(state, (frozen_idx, "L"), 0.9)


def test_update_world_size_expansion_and_contraction():
    state = reference_config()
    ws = next(i for i, p in enumerate(state.params) if p.name == "world_size")
    push_metric(state, (ws, "H"), 0.9)
    update_boundaries(state)
    assert state.params[ws].phi_high == 21.0       # 20 -> 21 on mean 0.9 > 0.85
    assert state.queues == {}                      # drained
    push_metric(state, (ws, "H"), 0.5)
    update_boundaries(state)
    assert state.params[ws].phi_high == 20.0       # contract on mean 0.5 < 0.75


def test_update_inside_band_and_empty_queues_are_noops():
    state = reference_config()
    ws = next(i for i, p in enumerate(state.params) if p.name == "world_size")
    push_metric(state, (ws, "H"), 0.8)             # inside [0.75, 0.85]
    update_boundaries(state)
    assert state.params[ws].phi_high == 20.0
    update_boundaries(state)                       # all queues empty
    assert state.params[ws].phi_high == 20.0
    assert state.params[ws].phi_low == 20.0


def test_contraction_clamps_at_opposite_boundary():
    state = ADRState(params=[ADRParam("a", 0.0, 10.0, 4.0, 4.5, 2.0)])
    push_metric(state, (0, "H"), 0.1)
    update_boundaries(state)
    p = state.params[0]
    assert p.phi_low <= p.phi_high
    assert p.phi_high == 4.0


@settings(max_examples=300, deadline=None)
@given(
    pushes=st.lists(
        st.tuples(st.integers(0, 1), st.sampled_from(["L", "H"]),
                  st.floats(0, 1)),
        max_size=30,
    )
)
def test_invariants_under_random_push_sequences(pushes):
    state = two_sided_state()
    for i, side, v in pushes:
        try:
            push_metric(state, (i, side), v)
        except KeyError:
            continue
    update_boundaries(state)
    for p in state.params:
        assert p.hard_min <= p.phi_low <= p.phi_high <= p.hard_max
    assert state.queues == {}


def test_monotone_response():
    def run(values):
        state = two_sided_state()
        for v in values:
            push_metric(state, (0, "H"), v)
        before = state.params[0].phi_high
        update_boundaries(state)
        return state.params[0].phi_high - before

    base = [0.8, 0.9, 0.86]
    moved = run(base)
    raised = run([v + 0.05 for v in base])
    assert raised >= moved


def test_simulate_adr_saturating_metric():
    state = reference_config()
    expected = {
        (p.name, side): acting_updates_to_limit(p, side)
        for i, p in enumerate(state.params)
        for side in (("H",) if p.frozen_low else ("L", "H"))
    }
    trace = simulate_adr(lambda lam: 1.0, steps=max(expected.values()) + 2)
    final = trace[-1]
    for p in reference_config().params:
        assert final[p.name][1] == p.hard_max
        if not p.frozen_low:
            assert final[p.name][0] == p.hard_min
    # the world-size boundary must take exactly ceil(range/step) = 12 updates
    ws_trace = [step["world_size"][1] for step in trace]
    assert ws_trace[11] == 32.0 and ws_trace[10] < 32.0


def test_simulate_adr_zero_metric_collapses_to_initial():
    trace = simulate_adr(lambda lam: 0.0, steps=5)
    ref = reference_config()
    for p in ref.params:
        lo, hi = trace[-1][p.name]
        assert lo == p.phi_low and hi == p.phi_high  # clamped at initial point


def test_simulate_adr_in_band_is_stationary():
    trace = simulate_adr(lambda lam: 0.8, steps=10)
    ref = reference_config()
    for p in ref.params:
        assert trace[-1][p.name] == (p.phi_low, p.phi_high)
