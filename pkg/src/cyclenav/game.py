"""Cyclic-order game rules.

A game over n goals rewards visits along one Hamiltonian cycle sigma or its
inverse. Rewards are +1 / 0 / -1 per goal entry:

  * the first goal entered always pays +1;
  * re-entering the goal just left pays 0 and changes nothing;
  * after one rewarded goal, either neighbour of it in the cycle pays +1 and
    pins the direction of travel;
  * once a direction is pinned, only the successor of the last goal in that
    direction pays +1;
  * anything else pays -1 and resets the context as if the entered goal were
    the first.

Games are additionally classified by the number of self-crossings of the
closed polyline that visits the goals in cycle order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import collinear_overlap, segments_properly_cross


class DegenerateGeometryError(Exception):
    """Goal layout admits no crossing classification (collinear overlaps etc.)."""


class TopologySamplingError(Exception):
    """Rejection sampling for a target crossing class exhausted its budget."""


@dataclass(frozen=True)
class CyclicOrder:
    """A directed Hamiltonian cycle over goals 0..n-1, stored in the canonical
    rotation that starts at goal 0. sigma and sigma^-1 are distinct orders."""

    perm: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError(f"not a permutation of 0..n-1: {self.perm}")
        if self.perm[0] != 0:
            raise ValueError(f"not in canonical rotation (must start at 0): {self.perm}")

    @staticmethod
    def from_sequence(seq) -> "CyclicOrder":
        """Canonicalise any rotation of a cycle to start at index 0."""
        seq = list(seq)
        k = seq.index(0)
        return CyclicOrder(tuple(seq[k:] + seq[:k]))

    @property
    def n(self) -> int:
        return len(self.perm)

    def inverse(self) -> "CyclicOrder":
        return CyclicOrder((0,) + tuple(reversed(self.perm[1:])))

    def successor(self, goal: int, direction: int = +1) -> int:
        i = self.perm.index(goal)
        return self.perm[(i + direction) % self.n]

    def are_adjacent(self, a: int, b: int) -> bool:
        return self.successor(a, +1) == b or self.successor(a, -1) == b

    def direction_of(self, prev: int, last: int) -> int:
        """+1 or -1: the travel direction in which `last` follows `prev`."""
        if self.successor(prev, +1) == last:
            return +1
        if self.successor(prev, -1) == last:
            return -1
        raise ValueError(f"{prev} and {last} are not adjacent in {self.perm}")


@dataclass(frozen=True)
class RewardContext:
    """The per-player reward state: the last rewarded goal and the one before it.

    prev is only ever set together with last; prev != last.
    """

    prev: int | None = None
    last: int | None = None

    def __post_init__(self):
        if self.prev is not None and self.last is None:
            raise ValueError("prev set without last")
        if self.prev is not None and self.prev == self.last:
            raise ValueError("prev == last")


@dataclass(frozen=True)
class GameSpec:
    n: int
    order: CyclicOrder
    crossings: int


def sample_order(n: int, rng: np.random.Generator) -> CyclicOrder:
    """Uniform draw over the (n-1)! canonical directed cycles."""
    if n < 3:
        raise ValueError("need at least 3 goals for a cycle")
    tail = rng.permutation(np.arange(1, n))
    return CyclicOrder((0,) + tuple(int(x) for x in tail))


def reward_for_entry(
    ctx: RewardContext, entered: int, order: CyclicOrder
) -> tuple[int, RewardContext]:
    """Apply one goal entry to the reward context. Returns (reward, new ctx)."""
    if entered >= order.n or entered < 0:
        raise ValueError(f"goal index {entered} out of range for n={order.n}")
    if entered == ctx.last:                                   # (a) re-entry
        return 0, ctx
    if ctx.last is None:                                      # (b) first goal
        return +1, RewardContext(None, entered)
    if ctx.prev is None:                                      # (c) pin direction
        if order.are_adjacent(ctx.last, entered):
            return +1, RewardContext(ctx.last, entered)
        return -1, RewardContext(None, entered)
    direction = order.direction_of(ctx.prev, ctx.last)        # (d) follow it
    if order.successor(ctx.last, direction) == entered:
        return +1, RewardContext(ctx.last, entered)
    return -1, RewardContext(None, entered)                   # (e) reset


def classify_crossings(goal_positions: np.ndarray, order: CyclicOrder) -> int:
    """Count interior self-intersections of the closed goal-visiting polyline.

    Adjacent segments share an endpoint, which never counts. Collinear overlap
    between any pair of segments is rejected as degenerate input.
    """
    pos = np.asarray(goal_positions, dtype=np.float64)
    n = order.n
    if len(pos) != n:
        raise ValueError("positions/order length mismatch")
    if len({tuple(p) for p in pos}) != n:
        raise ValueError("goal positions must be distinct")
    segs = [(pos[order.perm[i]], pos[order.perm[(i + 1) % n]]) for i in range(n)]
    count = 0
    for i, j in itertools.combinations(range(n), 2):
        a1, b1 = segs[i]
        a2, b2 = segs[j]
        if collinear_overlap(a1, b1, a2, b2):
            raise DegenerateGeometryError(
                f"segments {i} and {j} overlap collinearly"
            )
        adjacent = (j - i) % n == 1 or (i - j) % n == 1
        if adjacent:
            continue
        if segments_properly_cross(a1, b1, a2, b2):
            count += 1
    return count


@lru_cache(maxsize=None)
def feasible_crossing_classes(n: int) -> tuple[int, ...]:
    """Crossing counts achievable by some (placement, order) pair for n goals.

    Derived by enumerating every canonical order over many random placements
    (fixed internal seed, so the result is stable). Not assumed from a table.
    """
    rng = np.random.default_rng(12345 + n)
    seen: set[int] = set()
    orders = [
        CyclicOrder((0,) + p) for p in itertools.permutations(range(1, n))
    ]
    for _ in range(400):
        pos = rng.uniform(0, 1, size=(n, 2))
        for order in orders:
            try:
                seen.add(classify_crossings(pos, order))
            except DegenerateGeometryError:
                continue
    return tuple(sorted(seen))


def sample_game_uniform_topology(
    placement_sampler,
    n: int,
    rng: np.random.Generator,
    budget: int = 10_000,
) -> tuple[np.ndarray, GameSpec]:
    """Sample (goal positions, game) uniformly over achievable crossing classes.

    placement_sampler(rng) -> (n, 2) candidate goal centres. A target class is
    drawn uniformly over the feasible classes for n, then (placement, order)
    pairs are rejection-sampled until the target class is hit.
    """
    classes = feasible_crossing_classes(n)
    target = int(rng.choice(classes))
    for _ in range(budget):
        pos = placement_sampler(rng)
        order = sample_order(n, rng)
        try:
            c = classify_crossings(pos, order)
        except DegenerateGeometryError:
            continue
        if c == target:
            return pos, GameSpec(n=n, order=order, crossings=c)
    raise TopologySamplingError(
        f"no placement with {target} crossings for n={n} within {budget} attempts"
    )
