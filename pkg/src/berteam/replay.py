"""Replay buffer of winning teams with inverse-probability weights.

Teams drawn from the selector itself are over-represented in proportion to
how likely the selector was to draw them.  Weighting each inclusion by
1/selection_prob cancels that, so the weighted occurrence of team A tends to
its win probability W(A) regardless of the generator.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import ContractError, MaskedExample, TeamSequence, random_mask

WINNERS = "winners-inverse-prob"
OUTCOME_WEIGHTED = "outcome-weighted"


@dataclass
class WeightedExample:
    team: TeamSequence
    weight: float
    epoch_added: int = 0
    observation: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise ContractError(f"weight must be positive and finite, got {self.weight}")


class ReplayBuffer:
    def __init__(self, capacity: int = 2560, mode: str = WINNERS, max_weight: float = 1e4, drop_obs_prob: float = 0.5):
        if capacity < 1:
            raise ContractError("capacity must be >= 1")
        if mode not in (WINNERS, OUTCOME_WEIGHTED):
            raise ContractError(f"unknown buffer mode {mode!r}")
        self.capacity = capacity
        self.mode = mode
        self.max_weight = max_weight
        self.drop_obs_prob = drop_obs_prob
        self.entries: deque[WeightedExample] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def _append(self, team, weight: float, observation, epoch: int) -> None:
        weight = min(weight, self.max_weight)
        self.entries.append(WeightedExample(tuple(int(t) for t in team), float(weight), epoch, observation))

    def push_winner(self, team, selection_prob: float, observation=None, epoch: int = 0) -> None:
        if not 0.0 < selection_prob <= 1.0:
            raise ContractError(f"selection_prob must lie in (0, 1], got {selection_prob}")
        self._append(team, 1.0 / selection_prob, observation, epoch)

    def push_outcome_weighted(self, team, outcome: float, selection_prob: float, observation=None, epoch: int = 0) -> None:
        """Weight = outcome / selection_prob; zero-outcome teams are skipped."""
        if not 0.0 <= outcome <= 1.0:
            raise ContractError(f"outcome must lie in [0, 1], got {outcome}")
        if not 0.0 < selection_prob <= 1.0:
            raise ContractError(f"selection_prob must lie in (0, 1], got {selection_prob}")
        if outcome == 0.0:
            return
        self._append(team, outcome / selection_prob, observation, epoch)

    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries])

    def sample_entries(self, n: int, rng: np.random.Generator) -> list[WeightedExample]:
        if not self.entries:
            raise ContractError("cannot sample from an empty buffer")
        w = self.weights()
        idx = rng.choice(len(w), size=n, p=w / w.sum())
        return [self.entries[i] for i in idx]

    def sample_minibatch(self, batch_size: int, rng: np.random.Generator) -> list[MaskedExample]:
        """Weight-proportional draws, each masked with the MLM scheme.

        Returned examples carry unit weight: the buffer weight has already been
        spent on the draw probability.
        """
        out = []
        for e in self.sample_entries(batch_size, rng):
            obs = e.observation
            if obs is not None and rng.random() < self.drop_obs_prob:
                obs = None
            out.append(MaskedExample(e.team, random_mask(len(e.team), rng), obs, 1.0))
        return out

    def effective_distribution(self) -> dict[TeamSequence, float]:
        if not self.entries:
            raise ContractError("empty buffer")
        totals: dict[TeamSequence, float] = {}
        for e in self.entries:
            totals[e.team] = totals.get(e.team, 0.0) + e.weight
        z = sum(totals.values())
        return {team: w / z for team, w in sorted(totals.items())}

    def extend(self, entries: Iterable[WeightedExample]) -> None:
        for e in entries:
            self.entries.append(e)
