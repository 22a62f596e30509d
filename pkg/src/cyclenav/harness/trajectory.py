"""Trajectory files: a textual header describing the task, length-prefixed
binary step records, and a checksummed footer with final scores.

Files are byte-identical across repeated seeded runs (nothing time- or
host-dependent is written) and replaying a recorded expert reproduces its
poses verbatim with kinematics and collision bypassed.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from ..episodes import Episode, EpisodeResult
from ..expert import DropoutScheme
from ..tasks import TaskSpec
from ..worlds import WorldParams

FORMAT_NAME = "cyclenav-trajectory"
FORMAT_VERSION = 1
_STEP_MAGIC = b"S"
_FOOTER_MAGIC = b"TRAJEND:"


class TrajectoryError(Exception):
    """Unreadable, corrupt or mismatched trajectory file."""


class ReplayError(TrajectoryError):
    """Replay requested against a task that does not match the recording."""


@dataclass(frozen=True)
class Trajectory:
    task: TaskSpec
    players: tuple[str, ...]
    expert_direction: int | None
    steps: list                    # episodes.StepRecord
    final_scores: dict[str, int]
    complete: bool = True

    def reward_sequence(self, player: str) -> list[int]:
        return [s.rewards.get(player, 0) for s in self.steps]

    def pose_array(self, player: str) -> np.ndarray:
        return np.array([s.poses[player] for s in self.steps])


def _header_lines(task: TaskSpec, players, expert_direction, complete) -> list[str]:
    w = task.world
    return [
        f"format = {FORMAT_NAME}",
        f"version = {FORMAT_VERSION}",
        f"complete = {int(complete)}",
        f"players = {','.join(players)}",
        f"world.size = {w.world_size!r}",
        f"world.n_goals = {w.n_goals}",
        f"world.v_obstacle_density = {w.v_obstacle_density!r}",
        f"world.h_obstacle_density = {w.h_obstacle_density!r}",
        f"world.terrain_amplitude = {w.terrain_amplitude!r}",
        f"world.terrain_frequency = {w.terrain_frequency!r}",
        f"world.seed = {w.seed}",
        f"task.seed = {task.seed}",
        f"task.expert_speed = {task.expert_speed!r}",
        f"task.expert_noise = {task.expert_noise!r}",
        f"task.dropout_kind = {task.dropout.kind}",
        f"task.dropout_p = {task.dropout.p!r}",
        f"task.episode_length = {task.episode_length}",
        f"task.expert_direction = {expert_direction if expert_direction is not None else 'none'}",
        f"task.uniform_topology = {int(task.uniform_topology)}",
        f"task.has_expert = {int(task.has_expert)}",
    ]


def _parse_header(text: str) -> dict[str, str]:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise TrajectoryError(f"malformed header line: {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields


def _task_from_header(f: dict[str, str]) -> tuple[TaskSpec, int | None]:
    try:
        world = WorldParams(
            world_size=float(f["world.size"]),
            n_goals=int(f["world.n_goals"]),
            v_obstacle_density=float(f["world.v_obstacle_density"]),
            h_obstacle_density=float(f["world.h_obstacle_density"]),
            terrain_amplitude=float(f["world.terrain_amplitude"]),
            terrain_frequency=float(f["world.terrain_frequency"]),
            seed=int(f["world.seed"]),
        )
        direction = None if f["task.expert_direction"] == "none" else int(
            f["task.expert_direction"]
        )
        task = TaskSpec(
            world=world,
            seed=int(f["task.seed"]),
            expert_speed=float(f["task.expert_speed"]),
            expert_noise=float(f["task.expert_noise"]),
            dropout=DropoutScheme(f["task.dropout_kind"], float(f["task.dropout_p"])),
            episode_length=int(f["task.episode_length"]),
            expert_direction=direction,
            uniform_topology=bool(int(f["task.uniform_topology"])),
            has_expert=bool(int(f["task.has_expert"])),
        )
    except KeyError as e:
        raise TrajectoryError(f"header missing field {e}") from e
    return task, direction


def write_trajectory(path, task: TaskSpec, result: EpisodeResult,
                     complete: bool = True) -> None:
    players = tuple(sorted(result.scores))
    header = "\n".join(
        _header_lines(task, players, result.expert_direction, complete)
    ) + "\n\n"
    blob = bytearray(header.encode("utf-8"))
    for s in result.steps:
        rec = bytearray(_STEP_MAGIC)
        rec += struct.pack("<I", s.t)
        for p in players:
            x, y, h = s.poses[p]
            rec += struct.pack("<ddd", x, y, h)
            rec += struct.pack("<b", s.actions.get(p, -1))
            rec += struct.pack("<b", s.rewards.get(p, 0))
        rec += struct.pack("<B", s.e)
        rec += struct.pack("<B", len(s.events))
        for who, goal, reward in s.events:
            rec += struct.pack("<Bbb", players.index(who), goal, reward)
        blob += struct.pack("<H", len(rec)) + rec
    blob += _FOOTER_MAGIC
    for p in players:
        blob += struct.pack("<i", result.scores[p])
    blob += hashlib.sha256(bytes(blob)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_trajectory(path) -> Trajectory:
    from ..episodes import StepRecord

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 32:
        raise TrajectoryError("file too short")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise TrajectoryError("checksum mismatch: file corrupt or truncated")
    sep = body.find(b"\n\n")
    if sep < 0:
        raise TrajectoryError("missing header terminator")
    fields = _parse_header(body[:sep].decode("utf-8"))
    if fields.get("format") != FORMAT_NAME:
        raise TrajectoryError(f"not a {FORMAT_NAME} file")
    if int(fields.get("version", -1)) != FORMAT_VERSION:
        raise TrajectoryError(f"unsupported version {fields.get('version')}")
    task, direction = _task_from_header(fields)
    players = tuple(fields["players"].split(","))
    complete = bool(int(fields.get("complete", 1)))

    steps = []
    off = sep + 2
    while off < len(body) and not body.startswith(_FOOTER_MAGIC, off):
        (length,) = struct.unpack_from("<H", body, off)
        off += 2
        rec = body[off:off + length]
        off += length
        if rec[:1] != _STEP_MAGIC:
            raise TrajectoryError("bad step record magic")
        pos = 1
        (t,) = struct.unpack_from("<I", rec, pos)
        pos += 4
        poses, actions, rewards = {}, {}, {}
        for p in players:
            x, y, h = struct.unpack_from("<ddd", rec, pos)
            pos += 24
            (a,) = struct.unpack_from("<b", rec, pos)
            pos += 1
            (r,) = struct.unpack_from("<b", rec, pos)
            pos += 1
            poses[p] = (x, y, h)
            if a >= 0:
                actions[p] = a
            rewards[p] = r
        (e,) = struct.unpack_from("<B", rec, pos)
        pos += 1
        (n_ev,) = struct.unpack_from("<B", rec, pos)
        pos += 1
        events = []
        for _ in range(n_ev):
            pi, goal, reward = struct.unpack_from("<Bbb", rec, pos)
            pos += 3
            events.append((players[pi], goal, reward))
        steps.append(StepRecord(t=t, poses=poses, actions=actions,
                                rewards=rewards, e=e, events=events))
    if not body.startswith(_FOOTER_MAGIC, off):
        raise TrajectoryError("missing footer")
    off += len(_FOOTER_MAGIC)
    scores = {}
    for p in players:
        (v,) = struct.unpack_from("<i", body, off)
        off += 4
        scores[p] = v
    return Trajectory(task=task, players=players, expert_direction=direction,
                      steps=steps, final_scores=scores, complete=complete)


def record_episode(path, task: TaskSpec, agent_policy=None) -> Trajectory:
    """Run an episode (expert-solo unless an agent policy is given) and write
    it to disk; returns the loaded, checksum-verified trajectory."""
    result = Episode(task, agent_policy=agent_policy, record=True).run()
    write_trajectory(path, task, result)
    return load_trajectory(path)


class ReplayExpert:
    """Expert co-player that emits recorded poses verbatim (no kinematics,
    no collision). Sourced from a trajectory's expert pose stream."""

    def __init__(self, poses: np.ndarray):
        self.poses = poses

    def pose_at(self, t: int):
        t = min(t, len(self.poses) - 1)
        x, y, h = self.poses[t]
        return float(x), float(y), float(h)


def replay_expert(traj: Trajectory, task: TaskSpec) -> ReplayExpert:
    """Build a pose-replayed expert for `task` from a recorded trajectory.

    The recording must come from the same world/game: seeds, size and goal
    count must match, else ReplayError.
    """
    if "expert" not in traj.players:
        raise ReplayError("recording has no expert player")
    rw, tw = traj.task.world, task.world
    if (rw.seed, rw.world_size, rw.n_goals) != (tw.seed, tw.world_size, tw.n_goals):
        raise ReplayError(
            f"world mismatch: recorded (seed={rw.seed}, size={rw.world_size}, "
            f"goals={rw.n_goals}) vs requested (seed={tw.seed}, size={tw.world_size}, "
            f"goals={tw.n_goals})"
        )
    if traj.task.seed != task.seed:
        raise ReplayError(
            f"game seed mismatch: recorded {traj.task.seed} vs requested {task.seed}"
        )
    return ReplayExpert(traj.pose_array("expert"))
