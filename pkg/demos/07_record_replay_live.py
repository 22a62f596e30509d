"""Trajectory files and the live-play protocol: record a demonstration,
replay it as a collision-free expert, and drive a live session with a
scripted client over the newline-JSON protocol."""

import json
import socket
import tempfile
import threading
import time
from pathlib import Path

from cyclenav.episodes import Episode
from cyclenav.harness.live import serve_live
from cyclenav.harness.trajectory import load_trajectory, record_episode, replay_expert
from cyclenav.stubs import ReplayPolicy
from cyclenav.tasks import TaskSpec
from cyclenav.worlds import WorldParams

tmp = Path(tempfile.mkdtemp())
task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=11), seed=11,
                episode_length=400)

print("== record an expert demonstration ==")
traj = record_episode(tmp / "demo.traj", task)
print(f"  {len(traj.steps)} steps, final scores {traj.final_scores}")
print("  re-recording is byte-identical:",
      record_episode(tmp / "demo2.traj", task) == traj
      and (tmp / "demo.traj").read_bytes() == (tmp / "demo2.traj").read_bytes())

print("\n== replay it as the expert for a following agent ==")
rep = replay_expert(traj, task)
result = Episode(task, agent_policy=ReplayPolicy(), expert_override=rep).run()
print(f"  replayed-expert score {result.scores['expert']} "
      f"(recorded {traj.final_scores['expert']}), agent score {result.scores['agent']}")

print("\n== live session with a scripted controller client ==")
live_task = TaskSpec(world=WorldParams(world_size=16, n_goals=4, seed=12), seed=12,
                     episode_length=45)
summary = {}
th = threading.Thread(
    target=lambda: summary.update(
        serve_live(live_task, 47321, out_path=str(tmp / "live.traj"), paced=False)
    )
)
th.start()
time.sleep(0.3)
sock = socket.create_connection(("127.0.0.1", 47321))
f = sock.makefile("rwb")
f.write(b'{"type":"hello"}\n')
f.flush()
hello = json.loads(f.readline())
print(f"  hello: {len(hello['world']['goals'])} goals, tick rate {hello['tick_rate']}")
f.write(b'{"type":"action","action":"forward"}\n')
f.flush()
while True:
    msg = json.loads(f.readline())
    if msg["type"] == "state":
        f.write(b'{"type":"action","action":"forward"}\n')
        f.flush()
    elif msg["type"] == "end":
        print(f"  session end after {len(load_trajectory(tmp / 'live.traj').steps)} "
              f"recorded steps, complete={msg['complete']}")
        break
th.join()
