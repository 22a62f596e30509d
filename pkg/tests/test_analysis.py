import numpy as np
import pytest

from cyclenav.analysis import (
    GoalNeuronReport,
    ProbeResult,
    SCENARIOS,
    completed_cycles,
    generalisation_sweep,
    goal_neuron_rank,
    in_distribution,
    probe_social_neurons,
    recall_trials,
    trajectory_compare,
    two_option_preference,
)
from cyclenav.game import CyclicOrder
from cyclenav.stubs import (
    AntiFidelityPolicy,
    FollowerPolicy,
    MirrorFidelityPolicy,
    RandomEntryPolicy,
    RandomPolicy,
    ReplayPolicy,
)
from cyclenav.tasks import TaskSpec
from cyclenav.worlds import WorldParams


def flat_task(seed, n_goals=4, episode_length=900, **kw):
    return TaskSpec(
        world=WorldParams(world_size=16, n_goals=n_goals, seed=seed),
        seed=seed,
        expert_speed=1.0,
        episode_length=episode_length,
        **kw,
    )


# ----------------------------------------------------------- cycle counting

def events(*pairs):
    return [(t, g, r) for t, (g, r) in enumerate(pairs)]


def test_completed_cycles_detection():
    order = CyclicOrder((0, 1, 2, 3))
    ev = events((0, 1), (1, 1), (2, 1), (3, 1))
    assert completed_cycles(ev, order) == [1]
    ev = events((0, 1), (3, 1), (2, 1), (1, 1))
    assert completed_cycles(ev, order) == [-1]
    # a -1 breaks the run; 0 re-entries don't
    ev = events((0, 1), (1, 1), (3, -1), (2, 1), (1, 1), (1, 0), (0, 1), (3, 1))
    assert completed_cycles(ev, order) == [-1]
    # two disjoint laps
    ev = events(*[(g, 1) for g in (0, 1, 2, 3, 0, 1, 2, 3)])
    assert completed_cycles(ev, order) == [1, 1]


# ----------------------------------------------------------- two-option

def test_mirror_stub_prefers_demonstrated_direction():
    tasks = [flat_task(s, episode_length=600) for s in range(3)]
    pref = two_option_preference(MirrorFidelityPolicy, tasks)
    assert pref == 1.0


def test_anti_stub_never_matches():
    tasks = [flat_task(s, episode_length=600) for s in range(3)]
    pref = two_option_preference(AntiFidelityPolicy, tasks)
    assert pref == 0.0


def test_random_entry_stub_near_half():
    tasks = [flat_task(s, episode_length=900) for s in range(10)]
    pref = two_option_preference(RandomEntryPolicy, tasks, episodes_per_direction=3)
    assert pref is not None
    # binomial 3 sigma band around 0.5 given the cycles actually completed
    assert abs(pref - 0.5) < 0.25


def test_preference_undefined_when_no_cycles():
    class Idle:
        def reset(self, built, task, rng):
            pass

        def act(self, obs, view):
            from cyclenav.env import Action

            return Action.NOOP

    assert two_option_preference(lambda: Idle(), [flat_task(0, episode_length=60)]) is None


# ----------------------------------------------------------- recall

def test_recall_replay_stub_keeps_scoring():
    firsts, seconds = [], []
    for seed in range(4):
        report = recall_trials(ReplayPolicy(), flat_task(seed), n_trials=2,
                               trial_length=900)
        assert report.n_trials == 2
        firsts.append(report.trial_scores[0])
        seconds.append(report.trial_scores[1])
    assert sum(firsts) > 0
    assert sum(seconds) >= 0.8 * sum(firsts)


def test_recall_follower_stub_collapses():
    firsts, seconds = [], []
    for seed in range(4):
        report = recall_trials(FollowerPolicy(), flat_task(seed), n_trials=2,
                               trial_length=900)
        firsts.append(report.trial_scores[0])
        seconds.append(report.trial_scores[1])
    assert sum(firsts) > 0
    assert sum(seconds) <= 0.2 * sum(firsts)


def test_recall_four_trials_runs_full_length():
    report = recall_trials(ReplayPolicy(), flat_task(5), n_trials=4, trial_length=900)
    assert len(report.trial_scores) == 4


# ----------------------------------------------------------- sweeps

def test_sweep_replay_stub_scores_near_two_and_tags_ood():
    cells = generalisation_sweep(
        ReplayPolicy,
        axis="expert_noise",
        grid=[0.0, 1.0],
        base_task=flat_task(3),
        final_ranges={"expert_noise": (0.0, 0.5)},
        episodes_per_cell=5,
        half_steps=900,
    )
    clean, degenerate = cells
    assert not clean.ood and degenerate.ood
    assert clean.normalised_score >= 1.7
    # a fully random expert demonstrates nothing and rarely scores at all
    assert degenerate.normalised_score is None or degenerate.normalised_score < 0.5


def test_in_distribution_tagging():
    assert in_distribution(25.0, 20.0, 32.0)
    assert not in_distribution(38.4, 20.0, 32.0)   # 20% beyond the max
    assert not in_distribution(16.0, 20.0, 32.0)


# ----------------------------------------------------------- trajectories

def test_trajectory_scenarios():
    task = flat_task(4)
    comp = trajectory_compare(task, RandomPolicy(), "absent", half_steps=300)
    assert comp.expert_path is None
    assert completed_cycles(comp.agent_events, CyclicOrder((0, 1, 2, 3))) == []

    comp = trajectory_compare(task, FollowerPolicy(), "dropout-halfway", half_steps=300)
    assert comp.expert_visible[:301].all()   # visible through floor(N/2)
    assert not comp.expert_visible[301:].any()
    assert comp.agent_path.shape == (600, 2)

    comp = trajectory_compare(task, FollowerPolicy(), "wrong-halfway", half_steps=300)
    expert_neg = [r for _, _, r in comp.expert_events if r < 0]
    assert expert_neg, "expert should score -1s after switching to a wrong order"

    with pytest.raises(ValueError):
        trajectory_compare(task, RandomPolicy(), "nonsense")


def test_wrong_then_dropout_replay_stub_reproduces_wrong_path():
    task = flat_task(6)
    comp = trajectory_compare(task, ReplayPolicy(), "wrong-then-dropout", half_steps=450)
    # the agent keeps entering goals after dropout, following what was shown
    post = [e for e in comp.agent_events if e[0] >= 450]
    assert len(post) >= 2


# ----------------------------------------------------------- probing

def synthetic_beliefs(n=2000, d=32, signal_neuron=7, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, d))
    X[:, signal_neuron] = labels + rng.normal(0, 0.05, size=n)
    return X, labels


def test_probe_finds_constructed_social_neuron():
    X, y = synthetic_beliefs()
    res = probe_social_neurons(X, y, seed=1)
    assert res.social_neurons == [7]
    assert res.selected_mass >= 0.9
    assert res.test_accuracy >= 0.99
    assert abs(res.accuracy_social_randomised - 0.5) <= 0.1
    assert res.accuracy_complement_randomised >= 0.95
    assert abs(res.accuracy_all_randomised - 0.5) <= 0.1
    assert res.attention.min() >= 0
    assert res.attention.sum() == pytest.approx(1.0)


def test_probe_no_signal_dataset():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(1500, 16))
    y = rng.integers(0, 2, size=1500)
    res = probe_social_neurons(X, y, seed=0, train_steps=800)
    assert abs(res.test_accuracy - 0.5) <= 0.12


def test_probe_rejects_single_class():
    X = np.random.default_rng(0).normal(size=(100, 8))
    with pytest.raises(ValueError):
        probe_social_neurons(X, np.zeros(100, dtype=int))


# ----------------------------------------------------------- goal neurons

def test_goal_neuron_ranking():
    rng = np.random.default_rng(5)
    inside = rng.integers(0, 2, size=3000)
    X = rng.normal(size=(3000, 12))
    X[:, 4] = inside * 2.0 + rng.normal(0, 0.01, size=3000)
    X[:, 9] = 3.14                      # constant neuron
    report = goal_neuron_rank(X, inside)
    assert report.ranked[0] == 4
    assert report.correlations[4] == pytest.approx(1.0, abs=0.01)
    assert report.correlations[9] == pytest.approx(0.0, abs=1e-12)


def test_goal_neuron_shuffled_labels_within_null_band():
    rng = np.random.default_rng(6)
    inside = rng.integers(0, 2, size=4000)
    X = rng.normal(size=(4000, 10))
    report = goal_neuron_rank(X, inside)
    # null: corr ~ N(0, 1/sqrt(n)); top of 10 within 3+ sigma band
    assert np.abs(report.correlations).max() < 4.5 / np.sqrt(4000)
