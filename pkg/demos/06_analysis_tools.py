"""Behavioural analyses on stub agents: recall trials, two-option fidelity,
a generalisation sweep cell, and social-neuron probing on synthetic beliefs."""

import numpy as np

from cyclenav.analysis import (
    generalisation_sweep,
    probe_social_neurons,
    recall_trials,
    trajectory_compare,
    two_option_preference,
)
from cyclenav.stubs import AntiFidelityPolicy, FollowerPolicy, MirrorFidelityPolicy, ReplayPolicy
from cyclenav.tasks import TaskSpec
from cyclenav.worlds import WorldParams


def task(seed):
    return TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=seed),
                    seed=seed, expert_speed=1.0, episode_length=900)


print("== recall across contiguous 900-step trials (expert in trial 1 only) ==")
for name, pol in (("replay stub", ReplayPolicy()), ("follower stub", FollowerPolicy())):
    rep = recall_trials(pol, task(3), n_trials=3)
    print(f"  {name:<14} trial scores: {rep.trial_scores}")

print("\n== two-option fidelity ==")
tasks = [task(s) for s in range(4)]
print("  mirror stub :", two_option_preference(MirrorFidelityPolicy, tasks))
print("  anti stub   :", two_option_preference(AntiFidelityPolicy, tasks))

print("\n== one generalisation sweep cell (expert-noise axis, replay stub) ==")
cells = generalisation_sweep(ReplayPolicy, "expert_noise", [0.0, 0.3],
                             base_task=task(5),
                             final_ranges={"expert_noise": (0.0, 0.5)},
                             episodes_per_cell=3)
for c in cells:
    print(f"  noise={c.value:: .1f}: normalised score {c.normalised_score:.2f} "
          f"({'ood' if c.ood else 'in-distribution'})")

print("\n== trajectory scenario: wrong demo, then dropout ==")
comp = trajectory_compare(task(6), ReplayPolicy(), "wrong-then-dropout", half_steps=450)
post = [e for e in comp.agent_events if e[0] >= 450]
print(f"  agent entries after dropout: {len(post)} (reproducing what was shown)")

print("\n== social-neuron probing on a constructed belief dataset ==")
rng = np.random.default_rng(0)
labels = rng.integers(0, 2, size=3000)
beliefs = rng.normal(size=(3000, 64))
beliefs[:, 17] = labels + rng.normal(0, 0.05, size=3000)
res = probe_social_neurons(beliefs, labels, seed=0)
print(f"  selected neurons {res.social_neurons} with mass {res.selected_mass:.2f}")
print(f"  test accuracy {res.test_accuracy:.3f}; randomising them -> "
      f"{res.accuracy_social_randomised:.3f}; randomising the rest -> "
      f"{res.accuracy_complement_randomised:.3f}")
