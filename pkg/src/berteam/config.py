"""Experiment configuration: nested dataclasses loaded from YAML with strict validation.

Every field has a default.  A YAML file (or a profile) only lists the values
it changes; unknown keys are rejected with their full dotted path.  The
resolved configuration is what gets archived with each run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .coevolution import CoevConfig
from .model import ContractError
from .nn.layers import ArchConfig
from .rl import LearnerConfig
from .selectors import SelectorTraining

EXPERIMENT_KINDS = ("fixed-policy", "coevolution", "comparison", "nash")
PROFILES = ("desk", "paper")


class ConfigError(ValueError):
    pass


@dataclass
class GameConfig:
    kind: str = "gridctf"  # or "matrix" (the seven-policy fixture)
    width: int = 16
    height: int = 10
    max_steps: int = 200
    shaping: float = 0.0
    scripted_epsilon: float = 0.05  # action noise of scripted reference policies

    def __post_init__(self):
        if self.kind not in ("gridctf", "matrix"):
            raise ConfigError(f"unknown game kind {self.kind!r}")


@dataclass
class SelectorConfig:
    arch: ArchConfig = field(default_factory=ArchConfig)
    training: SelectorTraining = field(default_factory=SelectorTraining)
    noise_epsilon: float = 0.1
    unmask_order: str = "random"
    temperature: float = 1.0
    buffer_capacity: int = 2560
    buffer_mode: str = "winners-inverse-prob"
    max_weight: float = 1e4


@dataclass
class EvalConfig:
    snapshot_every: int = 50
    reference_games_per_pair: int = 4  # scripted-team round robin
    team_elo_games: int = 24  # games per population team in the team tournament
    expected_elo_games: int = 200
    aggression_reps: int = 1
    bt_prior: float = 0.5


@dataclass
class ComparisonConfig:
    grid: list = field(default_factory=lambda: [["coev", "berteam"], ["coev", "mcaa"], ["map-elites", "berteam"], ["map-elites", "mcaa"]])
    n_islands: int = 4
    island_learners: list = field(
        default_factory=lambda: [["reinforce-baseline", [64, 64]], ["reinforce-baseline", [96, 96]], ["reinforce", [64, 64]], ["reinforce", [96, 96]]]
    )
    ema_alpha: float = 0.1
    mcaa_temperature: float = 1.0
    me_lambda: float = 0.5
    me_max_unique_fraction: float = 0.5
    elites_per_island: int = 1


@dataclass
class NashConfig:
    fixture: str = "rock-paper-scissors"  # or "matching-pennies", "seven-policy"
    n_iters: int = 10_000
    record_every: int = 100
    init: str = "pure-first"  # or "best-response-uniform"


@dataclass
class ExperimentConfig:
    kind: str = "coevolution"
    seed: int = 0
    out_dir: str = "runs/default"
    profile: str = "desk"
    n_agents: int = 12
    coev: CoevConfig = field(default_factory=CoevConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    game: GameConfig = field(default_factory=GameConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    comparison: ComparisonConfig = field(default_factory=ComparisonConfig)
    nash: NashConfig = field(default_factory=NashConfig)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {EXPERIMENT_KINDS}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.n_agents < 1:
            raise ConfigError("n_agents must be >= 1")


def _build(cls, data: dict, path: str = ""):
    """Instantiate ``cls`` from defaults overridden by ``data``, recursing into nested dataclasses."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, val in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown config key {where!r}")
        current = getattr(defaults, key)
        if dataclasses.is_dataclass(current):
            kwargs[key] = _build(type(current), val, where)
        else:
            kwargs[key] = val
    try:
        return cls(**kwargs)
    except (ContractError, ConfigError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


DESK_ARCH = {"n_encoder_layers": 2, "n_decoder_layers": 2, "embed_dim": 64, "feedforward_dim": 256, "n_heads": 4}


def profile_overrides(profile: str, kind: str) -> dict:
    """Defaults per (profile, kind).  ``paper`` is the full-scale setting."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    if profile == "paper":
        if kind == "fixed-policy":
            return {
                "n_agents": 7,
                "game": {"kind": "matrix"},
                "coev": {"n_epochs": 3000, "n_games": 25, "n_rem": 0, "n_elites": 0},
            }
        if kind == "coevolution":
            return {
                "n_agents": 50,
                "coev": {"n_epochs": 8000, "n_games": 25, "n_rem": 1, "protection_epochs": 500, "n_elites": 3},
                "selector": {"training": {"sample_size": 512, "batch_size": 64}},
            }
        if kind == "comparison":
            return {
                "n_agents": 60,
                "coev": {"n_epochs": 4000, "n_games": 16, "n_rem": 1, "protection_epochs": 500, "n_elites": 3},
                "selector": {"training": {"sample_size": 512, "batch_size": 64}},
                "comparison": {"n_islands": 4, "elites_per_island": 1},
            }
        return {"nash": {"n_iters": 100_000, "record_every": 1000}}
    # desk
    if kind == "fixed-policy":
        return {
            "n_agents": 7,
            "game": {"kind": "matrix"},
            # Matrix games are cheap, so more games per epoch buy a larger
            # buffer; the top teams' target masses differ by only ~10%.
            "coev": {"n_epochs": 300, "n_games": 100, "n_rem": 0, "n_elites": 0},
            "selector": {"arch": DESK_ARCH, "buffer_capacity": 16000, "training": {"sample_size": 4096, "batch_size": 256, "lr": 3e-4}},
        }
    if kind in ("coevolution", "comparison"):
        return {
            "n_agents": 12,
            "game": {"kind": "gridctf", "shaping": 3.0},
            "learner": {"entropy_coef": 0.01},
            "coev": {"n_epochs": 300, "n_games": 10, "n_rem": 1, "protection_epochs": 50, "n_elites": 3, "generation_every": 10},
            # A short buffer keeps the training set close to the current
            # population, which changes every few epochs at this scale.
            "selector": {"arch": DESK_ARCH, "buffer_capacity": 640, "training": {"sample_size": 1024, "batch_size": 64, "lr": 3e-4}},
            "evaluation": {"expected_elo_games": 400, "team_elo_games": 96},
            "comparison": {"n_islands": 4},
        }
    return {"nash": {"n_iters": 10_000, "record_every": 100}}


def resolve_config(kind: str, profile: str = "desk", file_data: dict | None = None, seed: int | None = None, out_dir: str | None = None) -> ExperimentConfig:
    """Profile defaults, then the config file, then explicit command-line values."""
    data = merge(profile_overrides(profile, kind), file_data or {})
    data["kind"] = kind
    data["profile"] = profile
    if seed is not None:
        data["seed"] = seed
    if out_dir is not None:
        data["out_dir"] = out_dir
    return _build(ExperimentConfig, data)


def load_yaml(path) -> dict:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def config_to_dict(cfg) -> dict:
    def conv(v):
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        if isinstance(v, list):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return conv(dataclasses.asdict(cfg))


def dump_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True)
