from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ..model import ContractError


@dataclass
class EventCounts:
    captures: int = 0
    grabs: int = 0
    got_tagged: int = 0
    tags: int = 0

    def __iadd__(self, other: "EventCounts") -> "EventCounts":
        self.captures += other.captures
        self.grabs += other.grabs
        self.got_tagged += other.got_tagged
        self.tags += other.tags
        return self

    def as_dict(self) -> dict[str, int]:
        return {"captures": self.captures, "grabs": self.grabs, "got_tagged": self.got_tagged, "tags": self.tags}


def aggression_metric(e: EventCounts) -> float:
    """(1 + 2*captures + 1.5*grabs + got_tagged) / (1 + tags)."""
    for v in (e.captures, e.grabs, e.got_tagged, e.tags):
        if v < 0:
            raise ContractError("event counts must be nonnegative")
    return (1.0 + 2.0 * e.captures + 1.5 * e.grabs + e.got_tagged) / (1.0 + e.tags)


@dataclass
class Trajectory:
    observations: list[np.ndarray] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    gamma: float = 0.99

    def __len__(self) -> int:
        return len(self.actions)

    def append(self, obs, action: int, reward: float = 0.0) -> None:
        self.observations.append(obs)
        self.actions.append(action)
        self.rewards.append(reward)


@dataclass
class GameResult:
    outcome: np.ndarray
    # keyed by (team index, slot index)
    trajectories: dict[tuple[int, int], Trajectory] = field(default_factory=dict)
    events: dict[tuple[int, int], EventCounts] = field(default_factory=dict)
    rewards: dict[tuple[int, int], float] = field(default_factory=dict)
    steps: int = 0
    replay: list[dict] | None = None

    @property
    def winners(self) -> list[int]:
        return [i for i, o in enumerate(self.outcome) if o > 1.0 / len(self.outcome)]


class TeamGame(Protocol):
    n_teams: int

    def play(self, teams: Sequence[Sequence], rng: np.random.Generator) -> GameResult: ...


def normalize_outcome(raw: Sequence[float]) -> np.ndarray:
    out = np.asarray(raw, dtype=np.float64)
    return out / out.sum()
