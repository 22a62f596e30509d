"""Flat sectioned key-value experiment configuration.

The schema is closed: unknown sections or keys are rejected, every key has a
typed default, and each run writes the fully resolved configuration next to
its outputs so reruns are exact.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

from ..expert import DropoutScheme, NO_DROPOUT, probabilistic_dropout
from ..nets import TrainConfig
from ..tasks import TaskSpec
from ..training import TrainSetup
from ..worlds import WorldParams


class ConfigError(Exception):
    """Unknown key/section, bad type, or unreadable file."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "world": {
        "size": (float, 16.0),
        "n_goals": (int, 4),
        "v_obstacle_density": (float, 0.0),
        "h_obstacle_density": (float, 0.0),
        "terrain_amplitude": (float, 0.0),
        "terrain_frequency": (float, 0.1),
        "seed": (int, 0),
    },
    "game": {
        "episode_length": (int, 900),
        "uniform_topology": (_bool, True),
    },
    "expert": {
        "present": (_bool, True),
        "speed": (float, 1.0),
        "noise": (float, 0.0),
        "direction": (int, 0),          # 0 = sampled, +1 / -1 pinned
    },
    "dropout": {
        "kind": (str, "no"),            # no | full | half | probabilistic
        "p": (float, 0.0),
    },
    "train": {
        "ablation": (str, "MEDAL"),
        "budget_steps": (int, 2_000_000),
        "unroll": (int, 32),
        "batch_envs": (int, 16),
        "learning_rate": (float, 3e-4),
        "entropy_bonus": (float, 0.01),
        "value_coeff": (float, 0.5),
        "discount": (float, 0.99),
        "attention_weight": (float, 10.0),
        "attention_offset": (int, 0),
        "target_noise": (float, 0.0),
        "action_repeat": (int, 4),
        "grad_clip": (float, 5.0),
        "eval_every": (int, 50_000),
        "eval_tasks": (int, 4),
        "expert_speed_mult": (float, 1.0),
        "dropout_p": (float, -1.0),     # -1: default 10/episode_length
    },
    "adr": {
        "p_boundary": (float, 0.5),
        "update_every": (int, 32),
    },
    "run": {
        "seed": (int, 0),
        "out": (str, "runs"),
        "threads": (int, 1),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict[str, dict[str, object]]

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def task_spec(self) -> TaskSpec:
        w = self["world"]
        g = self["game"]
        e = self["expert"]
        d = self["dropout"]
        if d["kind"] == "probabilistic":
            scheme = probabilistic_dropout(float(d["p"]))
        else:
            scheme = DropoutScheme(str(d["kind"]), 0.0)
        return TaskSpec(
            world=WorldParams(
                world_size=w["size"],
                n_goals=w["n_goals"],
                v_obstacle_density=w["v_obstacle_density"],
                h_obstacle_density=w["h_obstacle_density"],
                terrain_amplitude=w["terrain_amplitude"],
                terrain_frequency=w["terrain_frequency"],
                seed=w["seed"],
            ),
            seed=self["run"]["seed"],
            expert_speed=e["speed"],
            expert_noise=e["noise"],
            dropout=scheme,
            episode_length=g["episode_length"],
            expert_direction=None if e["direction"] == 0 else int(e["direction"]),
            uniform_topology=g["uniform_topology"],
            has_expert=e["present"],
        )

    def train_setup(self, ablation: str | None = None) -> TrainSetup:
        t = self["train"]
        dropout_p = t["dropout_p"]
        return TrainSetup(
            ablation=ablation or str(t["ablation"]),
            world_size=self["world"]["size"],
            n_goals=self["world"]["n_goals"],
            episode_length=self["game"]["episode_length"],
            expert_speed_mult=t["expert_speed_mult"],
            expert_noise=self["expert"]["noise"],
            dropout_p=None if dropout_p < 0 else float(dropout_p),
            budget_steps=t["budget_steps"],
            seed=self["run"]["seed"],
            eval_every=t["eval_every"],
            eval_tasks=t["eval_tasks"],
            adr_update_every=self["adr"]["update_every"],
            adr_p_boundary=self["adr"]["p_boundary"],
        )

    def train_config(self) -> TrainConfig:
        t = self["train"]
        return TrainConfig(
            unroll=t["unroll"],
            discount=t["discount"],
            attention_weight=t["attention_weight"],
            attention_offset=t["attention_offset"],
            target_noise=t["target_noise"],
            learning_rate=t["learning_rate"],
            entropy_bonus=t["entropy_bonus"],
            value_coeff=t["value_coeff"],
            batch_envs=t["batch_envs"],
            grad_clip=t["grad_clip"],
            action_repeat=t["action_repeat"],
        )


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        values={s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    )


def load_config(path: str | None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse a config file (optional) plus 'section.key=value' overrides."""
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config {path}: {e}") from e
        for section in cp.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in cp.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                parser, _ = SCHEMA[section][key]
                try:
                    values[section][key] = parser(raw)
                except ValueError as e:
                    raise ConfigError(f"bad value for {section}.{key}: {e}") from e
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override must be section.key=value, got {dotted!r}")
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        parser, _ = SCHEMA[section][key]
        try:
            values[section][key] = parser(raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {dotted}: {e}") from e
    return ExperimentConfig(values=values)


def resolved_text(config: ExperimentConfig) -> str:
    out = io.StringIO()
    for section in SCHEMA:
        out.write(f"[{section}]\n")
        for key in SCHEMA[section]:
            v = config[section][key]
            if isinstance(v, bool):
                v = "true" if v else "false"
            out.write(f"{key} = {v}\n")
        out.write("\n")
    return out.getvalue()
