"""
Experiment configuration files.

Grammar: an INI-style text file of ``key = value`` lines grouped under the
sections ``[experiment]``, ``[dqn]`` and ``[reward]``. ``#`` and ``;`` start
comment lines. Lists are comma separated. Every key is optional; unknown
sections or keys are rejected.

    [experiment]
    environment = CartPole            # CartPole | Pendulum
    variation_axis = length           # length | mass
    expert_param_values = 0.1, 0.3, 1.2, 1.5, 2.0
    agent_param_value = 0.5
    modes = scotil, smmotil
    seeds = 0, 1, 2, 3, 4, 5, 6, 7, 8, 9
    train_episodes = 500
    moving_average_window = 50
    expert_train_episodes = 1000
    demo_seed = 0
    parallelism = 1
    output_dir = results

    [dqn]        # any DqnConfig field except seed / train_episodes / moving_average_window
    hidden_sizes = 64, 64

    [reward]     # any RewardConfig field except mode; transform defaults to exp here
    projection_count = 50
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path

from . import envs
from .dqn import DqnConfig
from .reward_engine import Mode, RewardConfig, Transform


class ConfigError(ValueError):
    pass


class Environment(str, enum.Enum):
    CARTPOLE = "CartPole"
    PENDULUM = "Pendulum"


class VariationAxis(str, enum.Enum):
    LENGTH = "length"
    MASS = "mass"


# expert and agent settings of the diverse-expert experiments
TABLE_DEFAULTS = {
    (Environment.PENDULUM, VariationAxis.LENGTH): ((0.3, 0.5, 1.2, 1.5, 1.7), 1.0),
    (Environment.PENDULUM, VariationAxis.MASS): ((0.1, 0.6, 1.2, 1.8, 2.0), 1.0),
    (Environment.CARTPOLE, VariationAxis.LENGTH): ((0.1, 0.3, 1.2, 1.5, 2.0), 0.5),
    (Environment.CARTPOLE, VariationAxis.MASS): ((0.001, 0.5, 2.1, 5.0, 8.0), 1.0),
}

DEFAULT_TRAIN_EPISODES = {Environment.CARTPOLE: 500, Environment.PENDULUM: 1000}

# which physical parameter each axis varies
PARAM_FIELD = {
    (Environment.CARTPOLE, VariationAxis.LENGTH): "pole_half_length",
    (Environment.CARTPOLE, VariationAxis.MASS): "cart_mass",
    (Environment.PENDULUM, VariationAxis.LENGTH): "length",
    (Environment.PENDULUM, VariationAxis.MASS): "mass",
}


@dataclass(frozen=True)
class ExperimentConfig:
    environment: Environment = Environment.CARTPOLE
    variation_axis: VariationAxis = VariationAxis.LENGTH
    expert_param_values: tuple[float, ...] | None = None
    agent_param_value: float | None = None
    modes: tuple[Mode, ...] = (Mode.SCOTIL, Mode.SMMOTIL)
    seeds: tuple[int, ...] = tuple(range(10))
    train_episodes: int | None = None
    moving_average_window: int = 50
    expert_train_episodes: int = 1000
    demo_seed: int = 0
    parallelism: int = 1
    output_dir: str = "results"
    dqn: DqnConfig = field(default_factory=DqnConfig)
    # positive per-step rewards; negated costs make early termination attractive
    reward: RewardConfig = field(default_factory=lambda: RewardConfig(transform=Transform.EXP))

    def __post_init__(self):
        env = Environment(self.environment)
        axis = VariationAxis(self.variation_axis)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("environment", env)
        set_("variation_axis", axis)
        experts, agent = TABLE_DEFAULTS[(env, axis)]
        if self.expert_param_values is None:
            set_("expert_param_values", experts)
        if self.agent_param_value is None:
            set_("agent_param_value", agent)
        if self.train_episodes is None:
            set_("train_episodes", DEFAULT_TRAIN_EPISODES[env])
        set_("expert_param_values", tuple(float(v) for v in self.expert_param_values))
        set_("modes", tuple(Mode(m) for m in self.modes))
        set_("seeds", tuple(int(s) for s in self.seeds))
        if not self.expert_param_values or min(self.expert_param_values) <= 0 or self.agent_param_value <= 0:
            raise ConfigError("expert and agent parameter values must be positive")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be non-empty and distinct")
        if not self.modes:
            raise ConfigError("at least one reward mode is required")
        if self.train_episodes < 0 or self.expert_train_episodes < 1 or self.parallelism < 1:
            raise ConfigError("episode budgets and parallelism must be positive")
        if self.moving_average_window < 1:
            raise ConfigError("moving_average_window must be >= 1")

    def env_params(self, value: float) -> envs.EnvParams:
        name = PARAM_FIELD[(self.environment, self.variation_axis)]
        cls = envs.CartPoleParams if self.environment is Environment.CARTPOLE else envs.PendulumParams
        return cls(**{name: value})

    def agent_env(self) -> envs.EnvParams:
        return self.env_params(self.agent_param_value)

    def expert_envs(self) -> list[envs.EnvParams]:
        return [self.env_params(v) for v in self.expert_param_values]

    @property
    def param_field(self) -> str:
        return PARAM_FIELD[(self.environment, self.variation_axis)]

    def dqn_for(self, seed: int, episodes: int | None = None) -> DqnConfig:
        return dataclasses.replace(
            self.dqn,
            seed=seed,
            train_episodes=self.train_episodes if episodes is None else episodes,
            moving_average_window=self.moving_average_window,
        )

    def reward_for(self, mode: Mode) -> RewardConfig:
        return dataclasses.replace(self.reward, mode=mode)


def _parse_list(raw: str, conv):
    return tuple(conv(x.strip()) for x in raw.split(",") if x.strip())


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _convert(cls, name: str, raw: str):
    f = {f.name: f for f in dataclasses.fields(cls)}[name]
    typ = str(f.type)
    if name in ("expert_param_values",):
        return _parse_list(raw, float)
    if name in ("seeds", "hidden_sizes"):
        return _parse_list(raw, int)
    if name == "modes":
        return _parse_list(raw, str)
    if name == "weights":
        return _parse_list(raw, float) or None
    if typ.startswith("bool"):
        return _parse_bool(raw)
    if typ.startswith("int"):
        return int(raw)
    if typ.startswith("float"):
        return float(raw)
    return raw.strip()


_EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"dqn", "reward"}
_DQN_KEYS = {f.name for f in dataclasses.fields(DqnConfig)} - {"seed", "train_episodes", "moving_average_window"}
_REWARD_KEYS = {f.name for f in dataclasses.fields(RewardConfig)} - {"mode"}
_SECTIONS = {"experiment": (ExperimentConfig, _EXPERIMENT_KEYS), "dqn": (DqnConfig, _DQN_KEYS), "reward": (RewardConfig, _REWARD_KEYS)}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values: dict[str, dict] = {s: {} for s in _SECTIONS}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        cls, allowed = _SECTIONS[section]
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = _convert(cls, key, raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {exc}") from None
    try:
        return ExperimentConfig(dqn=DqnConfig(**values["dqn"]), reward=RewardConfig(**{"transform": Transform.EXP, **values["reward"]}), **values["experiment"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
