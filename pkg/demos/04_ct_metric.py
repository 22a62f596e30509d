"""The cultural-transmission metric on stub agents with known signatures:
a pure follower lands near 0.75, follow-and-remember near 1, random near 0."""

import numpy as np

from cyclenav.ct import ct, run_ct_eval
from cyclenav.stubs import FollowerPolicy, RandomPolicy, ReplayPolicy
from cyclenav.tasks import TaskSpec
from cyclenav.worlds import WorldParams

print("== arithmetic reference points ==")
E = 10.0
print(f"  independent   ct(E, A, A, A)      = {ct(E, 4, 4, 4)}")
print(f"  pure follow   ct(E, E, 0, E/2)    = {ct(E, E, 0, E / 2)}")
print(f"  follow+recall ct(E, E, 0, E)      = {ct(E, E, 0, E)}")

print("\n== measured on stub agents (10 tasks each) ==")
for name, factory in (("follower", FollowerPolicy), ("replay", ReplayPolicy),
                      ("random", RandomPolicy)):
    vals = []
    for seed in range(10):
        task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=seed),
                        seed=seed, expert_speed=1.0, episode_length=900)
        vals.append(run_ct_eval(factory, task).ct)
    print(f"  {name:<10} mean ct = {np.mean(vals):+.3f}  (min {min(vals):+.3f}, "
          f"max {max(vals):+.3f})")
