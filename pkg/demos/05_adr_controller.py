"""The domain-randomisation controller in a synthetic closed loop: boundaries
expand while the metric is high, freeze inside the threshold band, contract
when the metric drops."""

import numpy as np

from cyclenav.adr import reference_config, sample_task_params, simulate_adr

state = reference_config()
print("== reference parameter table ==")
for p in state.params:
    side = "one-sided" if p.frozen_low else "two-sided"
    print(f"  {p.name:<22} [{p.hard_min:g}, {p.hard_max:g}] start {p.phi_low:g} "
          f"step {p.step:g} ({side})")

print("\n== boundary sampling ==")
rng = np.random.default_rng(0)
state.p_boundary = 1.0
for _ in range(4):
    lam, pin = sample_task_params(state, rng)
    i, side = pin
    print(f"  pinned {state.params[i].name}/{side} -> lambda[{i}] = {lam[i]:g}")

print("\n== closed loop with a saturating metric (ct = 1) ==")
trace = simulate_adr(lambda lam: 1.0, steps=101)
for k in (0, 5, 11, 30, 100):
    ws = trace[k]["world_size"]
    bs = trace[k]["bot_speed"]
    print(f"  after update {k + 1:>3}: world_size {ws}, bot_speed {bs}")

print("\n== metric inside the [0.75, 0.85] band: nothing moves ==")
trace = simulate_adr(lambda lam: 0.80, steps=20)
print("  final ranges equal initial:",
      all(trace[-1][p.name] == (p.phi_low, p.phi_high)
          for p in reference_config().params))

print("\n== difficulty-dependent metric: ranges settle at the frontier ==")
# pretend the agent copes while world_size stays under 26
trace = simulate_adr(lambda lam: 1.0 if lam[0] < 26 else 0.2, steps=60)
print("  world_size range after 60 updates:", trace[-1]["world_size"])
