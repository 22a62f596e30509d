"""cyclenav: a deterministic 2D goal-cycle navigation rig for studying
within-episode social learning.

Layers, bottom to top: worlds (procedural geometry), game (cyclic-order
reward rules), env/episodes (sensing, kinematics, stepping), expert (scripted
oracles and dropout), ct (the cultural-transmission metric), adr (curriculum
controller), nets/training (recurrent actor-critic with an avatar-prediction
auxiliary loss), analysis (recall, generalisation, fidelity, neuron probing)
and harness (config, trajectory files, CLI, live play server).
"""

from .worlds import WorldParams, World, generate_world, goal_diameter
from .game import CyclicOrder, GameSpec, RewardContext, reward_for_entry, sample_order
from .env import Action, Observation, sense
from .expert import (
    DropoutScheme,
    ExpertConfig,
    FULL_DROPOUT,
    HALF_DROPOUT,
    NO_DROPOUT,
    dropout_advance,
    probabilistic_dropout,
)
from .tasks import BuiltTask, TaskSpec, build_task
from .episodes import Episode, EpisodeResult, run_episode
from .ct import CTMeasurement, ct, normalised_score, run_ct_eval

__version__ = "0.1.0"
