from __future__ import annotations

import pytest
import yaml

from berteam.config import (
    EXPERIMENT_KINDS,
    PROFILES,
    ConfigError,
    ExperimentConfig,
    dump_yaml,
    load_yaml,
    merge,
    resolve_config,
)


def test_defaults_validate():
    cfg = ExperimentConfig()
    assert cfg.kind == "coevolution" and cfg.seed == 0


@pytest.mark.parametrize("profile", PROFILES)
@pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
def test_every_profile_resolves(kind, profile):
    cfg = resolve_config(kind, profile)
    assert cfg.kind == kind and cfg.profile == profile


def test_full_scale_profile_values():
    cfg = resolve_config("coevolution", "paper")
    assert cfg.n_agents == 50 and cfg.coev.n_epochs == 8000 and cfg.coev.n_games == 25
    fixed = resolve_config("fixed-policy", "paper")
    assert fixed.n_agents == 7 and fixed.coev.n_epochs == 3000 and fixed.game.kind == "matrix"


def test_desk_profile_values():
    cfg = resolve_config("coevolution", "desk")
    assert (cfg.n_agents, cfg.coev.n_epochs, cfg.coev.n_games) == (12, 300, 10)


def test_unknown_key_reports_full_path():
    with pytest.raises(ConfigError, match="selector.training.bogus"):
        resolve_config("coevolution", "desk", {"selector": {"training": {"bogus": 1}}})
    with pytest.raises(ConfigError, match="'nope'"):
        resolve_config("nash", "desk", {"nope": 1})


def test_invalid_values_are_rejected():
    with pytest.raises(ConfigError):
        resolve_config("coevolution", "desk", {"coev": {"n_rem": -1}})
    with pytest.raises(ConfigError):
        resolve_config("coevolution", "desk", {"game": {"kind": "chess"}})
    with pytest.raises(ConfigError):
        resolve_config("coevolution", "desk", seed=2**64)
    with pytest.raises(ConfigError):
        resolve_config("tag", "desk")
    with pytest.raises(ConfigError):
        resolve_config("nash", "huge")
    with pytest.raises(ConfigError, match="mapping"):
        resolve_config("nash", "desk", {"nash": 3})


def test_precedence_profile_file_cli():
    cfg = resolve_config("coevolution", "desk", {"seed": 5, "coev": {"n_games": 4}}, seed=9, out_dir="x")
    assert cfg.seed == 9 and cfg.out_dir == "x"
    assert cfg.coev.n_games == 4 and cfg.coev.n_epochs == 300


def test_merge_is_deep_and_pure():
    base = {"a": {"b": 1, "c": 2}}
    out = merge(base, {"a": {"b": 5}})
    assert out == {"a": {"b": 5, "c": 2}} and base == {"a": {"b": 1, "c": 2}}


def test_yaml_round_trip(tmp_path):
    cfg = resolve_config("comparison", "desk", seed=3)
    path = tmp_path / "cfg.yaml"
    path.write_text(dump_yaml(cfg))
    data = load_yaml(path)
    again = resolve_config(data.pop("kind"), data.pop("profile"), data)
    assert dump_yaml(again) == dump_yaml(cfg)


def test_yaml_top_level_must_be_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump([1, 2]))
    with pytest.raises(ConfigError):
        load_yaml(path)
