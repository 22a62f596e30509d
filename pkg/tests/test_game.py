import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyclenav.game import (
    CyclicOrder,
    DegenerateGeometryError,
    GameSpec,
    RewardContext,
    TopologySamplingError,
    classify_crossings,
    feasible_crossing_classes,
    reward_for_entry,
    sample_game_uniform_topology,
    sample_order,
)

A, B, C, D = 0, 1, 2, 3


def play(order, entries, ctx=None):
    ctx = ctx or RewardContext()
    rewards = []
    for e in entries:
        r, ctx = reward_for_entry(ctx, e, order)
        rewards.append(r)
    return rewards, ctx


# ---------------------------------------------------------------- orders

def test_sample_order_canonical_and_uniform_n4():
    rng = np.random.default_rng(0)
    seen = {}
    for _ in range(12_000):
        o = sample_order(4, rng)
        assert o.perm[0] == 0
        seen[o.perm] = seen.get(o.perm, 0) + 1
    assert len(seen) == 6  # (4-1)! distinct canonical cycles
    for count in seen.values():  # roughly uniform: 3 sigma multinomial band
        p = 1 / 6
        sigma = math.sqrt(12_000 * p * (1 - p))
        assert abs(count - 12_000 * p) < 3 * sigma


def test_three_goal_orders_are_mutual_inverses():
    rng = np.random.default_rng(1)
    seen = {sample_order(3, rng).perm for _ in range(100)}
    assert seen == {(0, 1, 2), (0, 2, 1)}
    assert CyclicOrder((0, 1, 2)).inverse() == CyclicOrder((0, 2, 1))


def test_enumerated_cycle_counts():
    for n in range(3, 8):
        canon = {
            CyclicOrder.from_sequence(p).perm
            for p in itertools.permutations(range(n))
        }
        assert len(canon) == math.factorial(n - 1)


def test_canonicalisation_and_validation():
    assert CyclicOrder.from_sequence([2, 3, 0, 1]).perm == (0, 1, 2, 3)
    with pytest.raises(ValueError):
        CyclicOrder((1, 0, 2))
    with pytest.raises(ValueError):
        CyclicOrder((0, 1, 1))


# ---------------------------------------------------------------- rewards

def test_first_entry_always_rewarded():
    order = CyclicOrder((0, 1, 2, 3))
    for g in range(4):
        r, ctx = reward_for_entry(RewardContext(), g, order)
        assert r == +1
        assert ctx == RewardContext(None, g)


def test_direction_pinning_and_reset():
    order = CyclicOrder((A, B, C, D))
    rewards, ctx = play(order, [A, B, C])
    assert rewards == [1, 1, 1]
    rewards, ctx = play(order, [A, B, D])
    assert rewards == [1, 1, -1]
    assert ctx == RewardContext(None, D)  # reset: as if D were the first


def test_reentry_of_last_goal_is_free():
    order = CyclicOrder((A, B, C, D))
    rewards, _ = play(order, [A, A, A, B])
    assert rewards == [1, 0, 0, 1]


def test_oscillation_scores_plus_one():
    order = CyclicOrder((A, B, C, D))
    rewards, _ = play(order, [A, B, A, B, A])
    assert rewards == [1, 1, -1, 1, -1]
    assert sum(rewards) == 1


def test_context_reset_rule_c_after_penalty():
    order = CyclicOrder((A, B, C, D))
    _, ctx = play(order, [A, B, D])     # -1, ctx=(None, D)
    r, _ = reward_for_entry(ctx, C, order)   # C adjacent to D: rule (c)
    assert r == +1
    r, _ = reward_for_entry(ctx, A, order)   # A adjacent to D too
    assert r == +1
    r, _ = reward_for_entry(ctx, B, order)   # B opposite D
    assert r == -1


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(4, 6),
    seed=st.integers(0, 10_000),
    length=st.integers(1, 20),
)
def test_chirality_same_rewards_under_inverse_order(n, seed, length):
    """Entry sequences score identically against sigma and sigma^-1."""
    rng = np.random.default_rng(seed)
    order = sample_order(n, rng)
    entries = rng.integers(0, n, size=length)
    r1, _ = play(order, entries)
    r2, _ = play(order.inverse(), entries)
    assert r1 == r2


@settings(max_examples=100, deadline=None)
@given(n=st.integers(4, 6), seed=st.integers(0, 10_000), start=st.integers(0, 5),
       direction=st.sampled_from([1, -1]), laps=st.integers(1, 3))
def test_clean_traversals_reward_every_entry_and_reverse_cleanly(
    n, seed, start, direction, laps
):
    rng = np.random.default_rng(seed)
    order = sample_order(n, rng)
    start %= n
    walk = []
    g = order.perm[start]
    for k in range(laps * n):
        walk.append(g)
        g = order.successor(g, direction)
    fwd, _ = play(order, walk)
    rev, _ = play(order, list(reversed(walk)))
    assert all(r == 1 for r in fwd)
    assert all(r == 1 for r in rev)


# ---------------------------------------------------------------- crossings

def _segments_of(pos, order):
    n = len(pos)
    return [
        (pos[order.perm[i]], pos[order.perm[(i + 1) % n]]) for i in range(n)
    ]


def crossings_oracle(pos, order):
    """Independent O(n^2) count via explicit 2x2 parametric solves."""
    segs = _segments_of(np.asarray(pos, float), order)
    n = len(segs)
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (j - i) % n == 1 or (i - j) % n == 1:
                continue
            (p, q), (u, v) = segs[i], segs[j]
            d1, d2 = q - p, v - u
            den = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(den) < 1e-14:
                continue
            w = u - p
            s = (w[0] * d2[1] - w[1] * d2[0]) / den
            t = (w[0] * d1[1] - w[1] * d1[0]) / den
            if 0 < s < 1 and 0 < t < 1:
                count += 1
    return count


def test_convex_square_orders():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert classify_crossings(square, CyclicOrder((0, 1, 2, 3))) == 0
    assert classify_crossings(square, CyclicOrder((0, 1, 3, 2))) == 1  # bowtie


def test_crossings_match_oracle_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(4, 7))
        pos = rng.uniform(0, 10, size=(n, 2))
        order = sample_order(n, rng)
        assert classify_crossings(pos, order) == crossings_oracle(pos, order)


def test_crossings_rigid_motion_invariance():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(4, 7))
        pos = rng.uniform(0, 10, size=(n, 2))
        order = sample_order(n, rng)
        base = classify_crossings(pos, order)
        theta = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        moved = pos @ R.T + rng.uniform(-5, 5, size=2)
        mirrored = pos * np.array([-1.0, 1.0])
        assert classify_crossings(moved, order) == base
        assert classify_crossings(mirrored, order) == base


def test_degenerate_collinear_overlap_rejected():
    pos = np.array([[0, 0], [2, 0], [1, 0], [3, 0]], float)
    with pytest.raises((DegenerateGeometryError, ValueError)):
        classify_crossings(pos, CyclicOrder((0, 1, 2, 3)))


def test_duplicate_positions_rejected():
    pos = np.array([[0, 0], [1, 1], [0, 0], [2, 2]], float)
    with pytest.raises(ValueError):
        classify_crossings(pos, CyclicOrder((0, 1, 2, 3)))


# ------------------------------------------------- topology-uniform games

def test_feasible_classes_for_four_goals():
    assert feasible_crossing_classes(4) == (0, 1)


def test_feasible_classes_for_five_goals_match_enumeration():
    # derived, not assumed: cross-check against the independent oracle
    rng = np.random.default_rng(11)
    seen = set()
    orders = [CyclicOrder((0,) + p) for p in itertools.permutations(range(1, 5))]
    for _ in range(300):
        pos = rng.uniform(0, 1, size=(5, 2))
        for order in orders:
            seen.add(crossings_oracle(pos, order))
    assert feasible_crossing_classes(5) == tuple(sorted(seen))


def test_uniform_topology_histogram():
    rng = np.random.default_rng(13)

    def placement(r):
        return r.uniform(0, 16, size=(4, 2))

    classes = feasible_crossing_classes(4)
    counts = dict.fromkeys(classes, 0)
    n_samples = 600
    for _ in range(n_samples):
        pos, spec = sample_game_uniform_topology(placement, 4, rng)
        assert spec.crossings == classify_crossings(pos, spec.order)
        counts[spec.crossings] += 1
    p = 1 / len(classes)
    sigma = math.sqrt(n_samples * p * (1 - p))
    for c in classes:
        assert abs(counts[c] - n_samples * p) < 3 * sigma


def test_sampling_error_when_budget_exhausted():
    rng = np.random.default_rng(17)

    def degenerate_placement(r):
        return np.array([[0, 0], [1, 0], [2, 0], [3, 0]], float)

    with pytest.raises(TopologySamplingError):
        sample_game_uniform_topology(degenerate_placement, 4, rng, budget=1)
