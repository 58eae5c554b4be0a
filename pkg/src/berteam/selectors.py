"""Team selectors: anything that can propose teams and learn from results.

A selector proposes ``n`` teams at once and reports, for each, the
probability with which it proposed it.  After the games it is shown the
teams, their outcomes and the probabilities of whichever selector actually
generated them, so a selector can also be trained "in the shadow" of
another one on the very same games.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .model import BERTeam, ContractError, GenerationPolicy
from .replay import OUTCOME_WEIGHTED, ReplayBuffer


class TeamSelector(Protocol):
    name: str

    def sample(self, n: int, k: int, rng: np.random.Generator, explore: bool = True) -> tuple[np.ndarray, np.ndarray]: ...

    def record(self, teams: np.ndarray, outcomes: np.ndarray, probs: np.ndarray, epoch: int) -> None: ...

    def end_epoch(self, epoch: int, rng: np.random.Generator) -> dict: ...

    def on_replace(self, removed: int, source: int) -> None: ...


@dataclass
class SelectorTraining:
    train_every: int = 10
    sample_size: int = 1024
    batch_size: int = 256
    lr: float = 1e-3

    def __post_init__(self):
        if self.train_every < 1 or self.batch_size < 1 or self.sample_size < self.batch_size:
            raise ContractError("need train_every >= 1 and sample_size >= batch_size >= 1")


class BERTeamSelector:
    """Captain from the noisy captain row, the rest completed by the model."""

    name = "berteam"

    def __init__(
        self,
        model: BERTeam,
        buffer: ReplayBuffer | None = None,
        policy: GenerationPolicy | None = None,
        training: SelectorTraining | None = None,
    ):
        self.model = model
        self.buffer = buffer if buffer is not None else ReplayBuffer()
        self.policy = policy or GenerationPolicy(noise_epsilon=0.1)
        self.training = training or SelectorTraining()
        self.optimizer = model.make_optimizer(self.training.lr)

    def sample(self, n, k, rng, explore=True):
        pol = self.policy
        if not explore:
            pol = GenerationPolicy(pol.unmask_order, pol.temperature, 0.0)
        caps, cap_p = self.model.noisy_captain_sample(k, pol, rng, size=n)
        if k == 1:
            return caps[:, None], cap_p
        teams, path_p = self.model.generate(n, k, pol, rng, captains=caps)
        return teams, cap_p * path_p

    def record(self, teams, outcomes, probs, epoch):
        for team, out, p in zip(teams, outcomes, probs):
            if self.buffer.mode == OUTCOME_WEIGHTED:
                self.buffer.push_outcome_weighted(team, float(out), float(p), epoch=epoch)
            elif out > 1.0 / 2:
                self.buffer.push_winner(team, float(p), epoch=epoch)

    def train(self, rng) -> float:
        tr = self.training
        losses = []
        for _ in range(tr.sample_size // tr.batch_size):
            losses.append(self.model.mlm_train_step(self.buffer.sample_minibatch(tr.batch_size, rng), self.optimizer))
        return float(np.mean(losses))

    def end_epoch(self, epoch, rng):
        if (epoch + 1) % self.training.train_every or not len(self.buffer):
            return {}
        return {"selector_loss": self.train(rng)}

    def on_replace(self, removed, source):
        pass


class UniformSelector:
    """Every slot uniform over the population."""

    name = "uniform"

    def __init__(self, n_agents: int):
        self.n_agents = n_agents

    def sample(self, n, k, rng, explore=True):
        teams = rng.integers(self.n_agents, size=(n, k))
        return teams, np.full(n, float(self.n_agents) ** -k)

    def record(self, teams, outcomes, probs, epoch):
        pass

    def end_epoch(self, epoch, rng):
        return {}

    def on_replace(self, removed, source):
        pass


class TeamListSelector:
    """Draws whole teams from an explicit list with fixed probabilities."""

    name = "team-list"

    def __init__(self, teams: Sequence[Sequence[int]], probs: Sequence[float] | None = None):
        self.teams = np.array([tuple(t) for t in teams], dtype=np.int64)
        p = np.full(len(self.teams), 1.0 / len(self.teams)) if probs is None else np.asarray(probs, float)
        if p.shape != (len(self.teams),) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ContractError("team probabilities must be a distribution over the listed teams")
        self.probs = p

    def sample(self, n, k, rng, explore=True):
        if self.teams.shape[1] != k:
            raise ContractError(f"listed teams have size {self.teams.shape[1]}, asked for {k}")
        idx = rng.choice(len(self.teams), size=n, p=self.probs)
        return self.teams[idx].copy(), self.probs[idx]

    def record(self, teams, outcomes, probs, epoch):
        pass

    def end_epoch(self, epoch, rng):
        return {}

    def on_replace(self, removed, source):
        pass
