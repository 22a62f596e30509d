"""Automatic domain randomisation: a product-of-uniforms task distribution
whose per-parameter boundaries widen or narrow based on boundary-pinned
cultural-transmission measurements.

Episodes sampled with a parameter pinned at one of its boundaries push their
ct value to that boundary's queue; at update time each nonempty queue's mean
is compared against thresholds (defaults 0.75 / 0.85): above the high
threshold the boundary moves outward by its step, below the low threshold it
moves inward, otherwise it stays. Queues are drained after every update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TH_LOW_DEFAULT = 0.75
TH_HIGH_DEFAULT = 0.85
BOUNDARY_SAMPLE_P_DEFAULT = 0.5


@dataclass
class ADRParam:
    """One randomised task parameter with its hard limits and live boundaries.

    A frozen side never moves, is never boundary-sampled and keeps no queue
    (used for one-sided parameters whose initial value sits at a hard limit).
    """

    name: str
    hard_min: float
    hard_max: float
    phi_low: float
    phi_high: float
    step: float
    frozen_low: bool = False
    frozen_high: bool = False

    def __post_init__(self):
        self.check()

    def check(self):
        if not (self.hard_min <= self.phi_low <= self.phi_high <= self.hard_max):
            raise ValueError(
                f"{self.name}: need hard_min <= phi_low <= phi_high <= hard_max, got "
                f"{self.hard_min}, {self.phi_low}, {self.phi_high}, {self.hard_max}"
            )
        if self.step <= 0:
            raise ValueError(f"{self.name}: step must be positive")


@dataclass
class ADRState:
    params: list[ADRParam]
    p_boundary: float = BOUNDARY_SAMPLE_P_DEFAULT
    th_low: float = TH_LOW_DEFAULT
    th_high: float = TH_HIGH_DEFAULT
    min_queue_len: int = 1
    queues: dict[tuple[int, str], list[float]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.th_low < self.th_high <= 1:
            raise ValueError("need 0 <= th_low < th_high <= 1")
        for key in self.queues:
            self._check_key(key)

    def unfrozen_sides(self) -> list[tuple[int, str]]:
        out = []
        for i, p in enumerate(self.params):
            if not p.frozen_low:
                out.append((i, "L"))
            if not p.frozen_high:
                out.append((i, "H"))
        return out

    def _check_key(self, key: tuple[int, str]):
        i, side = key
        if side not in ("L", "H") or not 0 <= i < len(self.params):
            raise KeyError(f"no such boundary: {key}")
        p = self.params[i]
        if (side == "L" and p.frozen_low) or (side == "H" and p.frozen_high):
            raise KeyError(f"boundary {key} ({p.name}) is frozen; it keeps no queue")

    def boundary_value(self, key: tuple[int, str]) -> float:
        i, side = key
        return self.params[i].phi_low if side == "L" else self.params[i].phi_high

    def ranges(self) -> dict[str, tuple[float, float]]:
        return {p.name: (p.phi_low, p.phi_high) for p in self.params}


def sample_task_params(
    state: ADRState, rng: np.random.Generator
) -> tuple[np.ndarray, tuple[int, str] | None]:
    """Draw a task parameter vector.

    With probability p_boundary one unfrozen (param, side) is chosen uniformly
    and that coordinate is pinned at its boundary value; the rest (or, without
    pinning, all coordinates) are uniform in [phi_low, phi_high]. Returns the
    vector and the pin tag (None when not boundary-sampled).
    """
    lam = np.array(
        [rng.uniform(p.phi_low, p.phi_high) if p.phi_high > p.phi_low else p.phi_low
         for p in state.params]
    )
    pinned: tuple[int, str] | None = None
    sides = state.unfrozen_sides()
    if sides and rng.random() < state.p_boundary:
        pinned = sides[int(rng.integers(len(sides)))]
        lam[pinned[0]] = state.boundary_value(pinned)
    return lam, pinned


def push_metric(state: ADRState, pinned: tuple[int, str], ct_value: float) -> ADRState:
    """Append a ct measurement to a boundary's queue (mutates and returns state).

    Episodes that were not boundary-sampled must not push; passing their
    pinned=None is a contract violation surfaced as KeyError.
    """
    if pinned is None:
        raise KeyError("episode was not boundary sampled; nothing to push")
    state._check_key(tuple(pinned))
    state.queues.setdefault(tuple(pinned), []).append(float(ct_value))
    return state


def update_boundaries(state: ADRState) -> ADRState:
    """Apply the threshold rule to every boundary with a (long enough) queue,
    clamp to hard limits, enforce phi_low <= phi_high, drain all queues."""
    for (i, side), q in state.queues.items():
        if len(q) < state.min_queue_len or len(q) == 0:
            continue
        p = state.params[i]
        mean = float(np.mean(q))
        if side == "L":
            if mean > state.th_high:
                p.phi_low -= p.step          # outward: widen downwards
            elif mean < state.th_low:
                p.phi_low += p.step          # inward
        else:
            if mean > state.th_high:
                p.phi_high += p.step         # outward: widen upwards
            elif mean < state.th_low:
                p.phi_high -= p.step         # inward
        p.phi_low = min(max(p.phi_low, p.hard_min), p.hard_max)
        p.phi_high = min(max(p.phi_high, p.hard_min), p.hard_max)
        if p.phi_low > p.phi_high:
            if side == "L":
                p.phi_low = p.phi_high
            else:
                p.phi_high = p.phi_low
    state.queues.clear()
    return state


# Reference controller configuration: seven task parameters with their hard
# limits, initial boundaries and step sizes. One-sided parameters start at a
# hard limit and only their other side adapts.
def reference_config(
    p_boundary: float = BOUNDARY_SAMPLE_P_DEFAULT,
    episode_length: int = 1800,
) -> ADRState:
    rows = [
        # name, min, initial, max, step
        ("world_size", 20.0, 20.0, 32.0, 1.0),
        ("h_obstacle_density", 0.0001, 0.0001, 0.01, 0.0001),
        ("v_obstacle_density", 0.0, 0.0, 0.2, 0.0005),
        ("terrain_amplitude", 10.0, 10.0, 15.0, 0.1),
        ("terrain_frequency", 0.01, 0.01, 0.1, 0.002),
        ("bot_speed", 7.0, 11.0, 14.0, 0.1),
        ("dropout_p", 2.0 / episode_length, 20.0 / episode_length,
         40.0 / episode_length, 2.0 / episode_length),
    ]
    params = []
    for name, lo, init, hi, step in rows:
        params.append(
            ADRParam(
                name=name,
                hard_min=lo,
                hard_max=hi,
                phi_low=init,
                phi_high=init,
                step=step,
                frozen_low=(init == lo),
                frozen_high=(init == hi),
            )
        )
    return ADRState(params=params, p_boundary=p_boundary)


def acting_updates_to_limit(param: ADRParam, side: str) -> int:
    """Number of expanding updates needed for a boundary to reach its hard
    limit: ceil(range / step), with float-noise guarded."""
    span = param.phi_low - param.hard_min if side == "L" else param.hard_max - param.phi_high
    return int(np.ceil(span / param.step - 1e-9))


def simulate_adr(
    synthetic_ct,
    steps: int,
    state: ADRState | None = None,
    rng: np.random.Generator | None = None,
    pushes_per_round: int = 1,
) -> list[dict[str, tuple[float, float]]]:
    """Closed-loop harness for the controller with a synthetic metric.

    Each round pushes synthetic_ct(lambda) for every unfrozen boundary
    (lambda drawn with that boundary pinned), then updates. Returns the
    boundary ranges after every round, most recent last.
    """
    if state is None:
        state = reference_config()
    if rng is None:
        rng = np.random.default_rng(0)
    trace = []
    for _ in range(steps):
        for key in state.unfrozen_sides():
            for _ in range(pushes_per_round):
                lam = np.array(
                    [rng.uniform(p.phi_low, p.phi_high) if p.phi_high > p.phi_low
                     else p.phi_low for p in state.params]
                )
                lam[key[0]] = state.boundary_value(key)
                push_metric(state, key, float(synthetic_ct(lam)))
        update_boundaries(state)
        trace.append(state.ranges())
    return trace
