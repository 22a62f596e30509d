"""Cultural-transmission metric and score normalisation.

ct = (A_full - A_solo) / (2 E) + (A_half - A_solo) / (2 E), where E is the
expert's solo episode score and A_* are the agent's scores under no / full /
half expert dropout. Near 0: independent agent. Near 0.75: pure follower.
Near 1: follows while the expert is present and keeps scoring after dropout.
"""

from __future__ import annotations

from dataclasses import dataclass

from .episodes import Episode
from .expert import FULL_DROPOUT, HALF_DROPOUT, NO_DROPOUT
from .tasks import TaskSpec, build_task


class UndefinedMetricError(Exception):
    """The metric's denominator is zero (or nonpositive where positivity is required)."""


@dataclass(frozen=True)
class CTMeasurement:
    expert_score: float                 # E
    agent_full: float                   # A_full (dropout: no)
    agent_solo: float                   # A_solo (dropout: full)
    agent_half: float                   # A_half (dropout: half)
    ct: float


def ct(expert_score: float, agent_full: float, agent_solo: float, agent_half: float) -> float:
    if expert_score == 0:
        raise UndefinedMetricError("expert score is 0; ct undefined")
    return 0.5 * (agent_full - agent_solo) / expert_score + 0.5 * (
        agent_half - agent_solo
    ) / expert_score


def normalised_score(agent_score_full_episode: float, expert_score_half_episode: float) -> float:
    """Agent score over a presence+dropout episode divided by the expert score
    over the presence half. 1 = pure following, 2 = following plus recall."""
    if expert_score_half_episode <= 0:
        raise UndefinedMetricError(
            f"expert half-episode score {expert_score_half_episode} is not positive"
        )
    return agent_score_full_episode / expert_score_half_episode


def run_ct_eval(agent_policy_factory, task: TaskSpec) -> CTMeasurement:
    """Measure ct for one task.

    Runs four episodes on the identical world/game seed and expert direction,
    differing only in dropout: agent under no/full/half dropout, plus an
    expert-solo episode for E. A_solo uses full dropout (expert hidden for the
    whole episode) rather than removing the expert, so observation shapes and
    seeding match across the four runs.

    agent_policy_factory() must return a fresh (or reset-safe) policy; it is
    called once per episode so recurrent state never leaks between runs.
    """
    if not task.has_expert:
        raise ValueError("run_ct_eval needs a task with an expert slot")
    built = build_task(task)
    solo = Episode(task.with_dropout(NO_DROPOUT), agent_policy=None,
                   built=built, record=False).run()
    e_score = solo.scores["expert"]

    agent_scores = {}
    for name, scheme in (("full", NO_DROPOUT), ("solo", FULL_DROPOUT), ("half", HALF_DROPOUT)):
        result = Episode(
            task.with_dropout(scheme),
            agent_policy=agent_policy_factory(),
            built=built,
            record=False,
        ).run()
        agent_scores[name] = result.scores["agent"]

    return CTMeasurement(
        expert_score=e_score,
        agent_full=agent_scores["full"],
        agent_solo=agent_scores["solo"],
        agent_half=agent_scores["half"],
        ct=ct(e_score, agent_scores["full"], agent_scores["solo"], agent_scores["half"]),
    )
