from __future__ import annotations

import numpy as np
import pytest

from berteam.nn.layers import ArchConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_arch():
    """A small deterministic architecture for fast model tests."""
    return ArchConfig(1, 1, 16, 32, 2, 0.0, "gelu", True)


TINY_ARCH = {"n_encoder_layers": 1, "n_decoder_layers": 1, "embed_dim": 8, "feedforward_dim": 16, "n_heads": 2}


def tiny_overrides(kind: str) -> dict:
    """Smallest settings that still exercise every stage of an experiment kind."""
    if kind == "nash":
        return {"nash": {"n_iters": 200, "record_every": 50}}
    data = {
        "selector": {"arch": TINY_ARCH, "training": {"train_every": 2, "sample_size": 16, "batch_size": 8}, "buffer_capacity": 64},
        "evaluation": {"snapshot_every": 2, "reference_games_per_pair": 1, "team_elo_games": 6, "expected_elo_games": 8},
    }
    if kind == "fixed-policy":
        data["coev"] = {"n_epochs": 4, "n_games": 5}
        return data
    data["n_agents"] = 4
    data["game"] = {"kind": "gridctf", "width": 8, "height": 5, "max_steps": 12}
    data["learner"] = {"hidden": [8]}
    data["coev"] = {"n_epochs": 4, "n_games": 2, "protection_epochs": 1, "n_elites": 1, "generation_every": 2}
    data["comparison"] = {"n_islands": 2, "island_learners": [["reinforce-baseline", [8]], ["reinforce", [8]]]}
    return data


@pytest.fixture
def tiny_config(tmp_path):
    from berteam.config import merge, resolve_config

    def make(kind: str, seed: int = 0, out: str = "run", extra: dict | None = None):
        return resolve_config(kind, "desk", merge(tiny_overrides(kind), extra or {}), seed=seed, out_dir=str(tmp_path / out))

    return make


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
