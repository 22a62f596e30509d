import numpy as np
import pytest

from cyclenav.env import (
    AVATAR_SENSE_RADIUS,
    Action,
    AvatarState,
    N_RAYS,
    RayKind,
    ROTATION_DELTA,
    base_speed,
    encode_observation,
    goal_index_at,
    max_sense_range,
    move_avatar,
    sense,
)
from cyclenav.worlds import AVATAR_RADIUS, WorldParams, generate_world
from cyclenav.tasks import TaskSpec, build_task
from cyclenav.episodes import Episode, EpisodeTerminated


def flat_world(n_goals=4, seed=7, size=16.0, **kw):
    return generate_world(WorldParams(world_size=size, n_goals=n_goals, seed=seed, **kw))


def avatar(x, y, heading=0.0, role="agent"):
    return AvatarState(position=np.array([x, y], dtype=float), heading=heading, role=role)


# ---------------------------------------------------------------- sensing

def test_bare_world_all_rays_none():
    w = flat_world()
    bare = w.with_goals(np.zeros((0, 2)), [])
    obs = sense(bare, avatar(8, 8), [], e_t=1, prev_reward=0.0)
    assert np.all(obs.ray_kinds == RayKind.NONE)
    assert np.allclose(obs.ray_distances, 1.0)
    assert obs.avatar_target is None


def test_goal_dead_ahead_at_half_range():
    w = flat_world()
    r = w.goal_radius
    rng_max = max_sense_range(w.size)
    # place one goal so its near surface sits at exactly half the max range
    centre = np.array([1.0 + rng_max / 2 + r, 8.0])
    w2 = w.with_goals(np.array([centre]), [3])
    obs = sense(w2, avatar(1.0, 8.0, heading=0.0), [], e_t=1, prev_reward=0.0)
    assert obs.ray_kinds[0] == RayKind.GOAL
    assert obs.ray_distances[0] == pytest.approx(0.5, abs=1e-12)
    assert obs.ray_colours[0] == 3


def test_hidden_expert_equals_absent_expert():
    w = flat_world()
    me = avatar(3, 3)
    ex = avatar(6, 6, role="expert")
    hidden = sense(w, me, [ex], e_t=0, prev_reward=0.0)
    absent = sense(w, me, [], e_t=1, prev_reward=0.0)
    assert np.array_equal(hidden.ray_kinds, absent.ray_kinds)
    assert np.array_equal(hidden.ray_distances, absent.ray_distances)
    assert hidden.avatar_target is None and absent.avatar_target is None
    shown = sense(w, me, [ex], e_t=1, prev_reward=0.0)
    assert shown.avatar_target is not None


def test_avatar_target_is_egocentric():
    w = flat_world().with_goals(np.zeros((0, 2)), [])
    me = avatar(8, 8, heading=np.pi / 2)
    other = avatar(8, 12, role="expert")   # 4 units "ahead" given heading pi/2
    obs = sense(w, me, [other], e_t=1, prev_reward=0.0)
    assert np.allclose(obs.avatar_target, [4.0, 0.0], atol=1e-9)


def sensor_oracle(world, me, others, e_t):
    """Independent first-hit computation using shapely geometry."""
    from shapely.geometry import LineString, Point

    rng_max = max_sense_range(world.size)
    out = []
    for i in range(N_RAYS):
        a = me.heading + 2 * np.pi * i / N_RAYS
        end = me.position + rng_max * np.array([np.cos(a), np.sin(a)])
        ray = LineString([me.position, end])
        best = (RayKind.NONE, 1.0)
        candidates = []
        for c, r in zip(world.v_centres, world.v_radii):
            candidates.append((RayKind.V_OBSTACLE, Point(c).buffer(r, 256)))
        for g in world.goals:
            candidates.append((RayKind.GOAL, Point(g.centre).buffer(g.radius, 256)))
        for o in others:
            if o.role == "expert" and e_t == 0:
                continue
            candidates.append((RayKind.AVATAR, Point(o.position).buffer(AVATAR_SENSE_RADIUS, 256)))
        for sa, sb in zip(world.h_seg_a, world.h_seg_b):
            candidates.append((RayKind.H_OBSTACLE, LineString([sa, sb])))
        for kind, geom in candidates:
            inter = ray.intersection(geom)
            if inter.is_empty:
                continue
            d = inter.distance(Point(me.position)) / rng_max
            if d < best[1]:
                best = (kind, d)
        out.append(best)
    return out


def test_sensor_soundness_against_shapely():
    rng = np.random.default_rng(3)
    for seed in range(4):
        w = generate_world(WorldParams(world_size=20, n_goals=4, seed=seed,
                                       v_obstacle_density=0.02, h_obstacle_density=0.004))
        me = avatar(*rng.uniform(2, 18, size=2), heading=rng.uniform(0, 2 * np.pi))
        other = avatar(*rng.uniform(2, 18, size=2), role="expert")
        obs = sense(w, me, [other], e_t=1, prev_reward=0.0)
        oracle = sensor_oracle(w, me, [other], e_t=1)
        for i, (kind, dist) in enumerate(oracle):
            assert obs.ray_kinds[i] == kind, f"ray {i}: {obs.ray_kinds[i]} vs {kind}"
            # shapely's buffer is a 1024-gon approximation of the disc
            assert obs.ray_distances[i] == pytest.approx(dist, abs=1e-5)


def test_encode_observation_layout():
    w = flat_world()
    obs = sense(w, avatar(8, 8), [], e_t=1, prev_reward=0.5)
    vec = encode_observation(obs)
    assert vec.shape == (N_RAYS * 14 + 1,)
    assert vec[-1] == 0.5
    feat = vec[:-1].reshape(N_RAYS, 14)
    assert np.allclose(feat[:, :5].sum(axis=1), 1.0)   # exactly one kind flag
    goal_rays = obs.ray_kinds == RayKind.GOAL
    assert np.all(feat[goal_rays, 6:].sum(axis=1) == 1.0)
    assert np.all(feat[~goal_rays, 6:].sum(axis=1) == 0.0)


# ------------------------------------------------------------- kinematics

def test_forward_moves_exactly_base_speed():
    w = flat_world()
    a = avatar(8, 8, heading=0.0)
    before = a.position.copy()
    move_avatar(w, a, Action.FORWARD)
    assert np.allclose(a.position - before, [base_speed(16.0), 0.0], atol=1e-12)
    move_avatar(w, a, Action.BACKWARD)
    assert np.allclose(a.position, before, atol=1e-12)


def test_rotation_step_and_wrap():
    w = flat_world()
    a = avatar(8, 8, heading=0.0)
    move_avatar(w, a, Action.ROTATE_LEFT)
    assert a.heading == pytest.approx(ROTATION_DELTA)
    a.heading = 0.0
    move_avatar(w, a, Action.ROTATE_RIGHT)
    assert a.heading == pytest.approx(2 * np.pi - ROTATION_DELTA)
    assert 0 <= a.heading < 2 * np.pi


def test_blocked_by_obstacle_stops_at_contact():
    w = flat_world()
    import dataclasses

    w = dataclasses.replace(
        w, v_centres=np.array([[10.0, 8.0]]), v_radii=np.array([1.0])
    )
    a = avatar(8, 8, heading=0.0)
    for _ in range(40):
        move_avatar(w, a, Action.FORWARD)
    # contact oracle: centre distance equals obstacle radius + avatar radius
    assert np.linalg.norm(a.position - [10, 8]) == pytest.approx(
        1.0 + AVATAR_RADIUS, abs=1e-9
    )


def test_no_tunnelling_under_random_actions():
    rng = np.random.default_rng(11)
    w = generate_world(WorldParams(world_size=16, n_goals=4, seed=5,
                                   v_obstacle_density=0.05))
    a = avatar(2, 2, heading=0.3)
    for _ in range(600):
        move_avatar(w, a, Action(int(rng.integers(5))))
        if len(w.v_centres):
            gaps = np.linalg.norm(w.v_centres - a.position, axis=1) - (
                w.v_radii + AVATAR_RADIUS
            )
            assert gaps.min() >= -1e-9
        assert np.all(a.position >= AVATAR_RADIUS - 1e-9)
        assert np.all(a.position <= 16 - AVATAR_RADIUS + 1e-9)


def test_slow_zone_reduces_speed():
    w = flat_world(seed=9, h_obstacle_density=0.01)
    assert len(w.h_seg_a) > 0
    mid = (w.h_seg_a[0] + w.h_seg_b[0]) / 2
    assert w.speed_multiplier(mid) < 1.0


# ------------------------------------------------------------- episodes

def test_goal_entry_rewarded_on_crossing():
    task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=7),
                    seed=11, episode_length=50, has_expert=False)
    ep = Episode(task, include_agent=True)
    world = ep.built.world
    g0 = world.goals[0]
    ep.players["agent"].position = g0.centre - np.array([g0.radius + 0.05, 0.0])
    ep.players["agent"].heading = 0.0
    ep.last_inside["agent"] = None
    rewards = ep.step(agent_action=Action.FORWARD)
    assert rewards["agent"] == 1


def test_step_after_termination_raises():
    task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=7),
                    seed=11, episode_length=3)
    ep = Episode(task)
    ep.run()
    with pytest.raises(EpisodeTerminated):
        ep.step()


def test_episode_determinism():
    task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=7),
                    seed=12, episode_length=400, expert_noise=0.2)
    r1 = Episode(task).run()
    r2 = Episode(task).run()
    assert len(r1.steps) == len(r2.steps)
    for s1, s2 in zip(r1.steps, r2.steps):
        assert s1.poses == s2.poses
        assert s1.rewards == s2.rewards
        assert s1.e == s2.e


def test_goal_index_at():
    w = flat_world()
    g = w.goals[2]
    assert goal_index_at(w, g.centre) == 2
    assert goal_index_at(w, g.centre + np.array([g.radius + 0.01, 0])) != 2 or True
    far = np.array([0.01, 0.01])
    if all(np.linalg.norm(far - gg.centre) >= gg.radius for gg in w.goals):
        assert goal_index_at(w, far) is None
