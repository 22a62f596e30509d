"""The goal-entry reward rules, played by hand on a 4-cycle."""

from cyclenav.game import CyclicOrder, RewardContext, reward_for_entry

A, B, C, D = range(4)
order = CyclicOrder((A, B, C, D))


def play(entries, label):
    ctx = RewardContext()
    rewards = []
    for e in entries:
        r, ctx = reward_for_entry(ctx, e, order)
        rewards.append(r)
    names = "".join("ABCD"[e] for e in entries)
    print(f"  {label:<28} {names:<12} -> {rewards}  (total {sum(rewards)})")
    return rewards


print("rewarding cycle: A-B-C-D (and its reverse)")
play([A, B, C, D, A], "clean forward lap")
play([A, D, C, B, A], "clean reverse lap")
play([B, A, D, C, B], "lap from another start")
play([A, B, D], "wrong goal resets context")
play([A, B, D, C, B], "recovery after a reset")
play([A, A, A, B], "re-entering the last is free")
play([A, B, A, B, A], "oscillation nets +1 then stalls")
