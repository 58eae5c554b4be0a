"""Per-agent policy-gradient learners (REINFORCE, optionally with a value baseline)."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .games.base import Trajectory
from .games.gridctf import N_ACTIONS, N_FEATURES
from .model import ContractError
from .nn import tensor as T
from .nn.layers import Linear, Module
from .nn.optim import Adam
from .nn.tensor import Tensor, softmax_array

LEARNER_KINDS = ("reinforce-baseline", "reinforce")


@dataclass
class LearnerConfig:
    kind: str = "reinforce-baseline"
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 3e-3
    value_lr: float = 3e-3
    gamma: float = 0.99
    entropy_coef: float = 0.0
    n_features: int = N_FEATURES
    n_actions: int = N_ACTIONS

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ContractError(f"unknown learner kind {self.kind!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")
        self.hidden = tuple(int(h) for h in self.hidden)


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """G_t = sum_{i >= t} gamma^(i-t) r_i."""
    if len(rewards) == 0:
        raise ContractError("empty trajectory")
    out = np.empty(len(rewards))
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


class MLP(Module):
    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.tanh(x)
        return x

    def fast(self, x: np.ndarray) -> np.ndarray:
        for i, layer in enumerate(self.layers):
            x = x @ layer.W.data + layer.b.data
            if i < len(self.layers) - 1:
                x = np.tanh(x)
        return x


class PolicyLearner(Module):
    def __init__(self, cfg: LearnerConfig | None = None, seed: int = 0):
        self.cfg = cfg or LearnerConfig()
        rng = np.random.default_rng(seed)
        c = self.cfg
        self.policy = MLP([c.n_features, *c.hidden, c.n_actions], rng)
        self.value = MLP([c.n_features, *c.hidden, 1], rng)
        self.policy_opt = Adam(self.policy.parameters(), lr=c.lr)
        self.value_opt = Adam(self.value.parameters(), lr=c.value_lr)

    def zero_policy_head(self) -> None:
        head = self.policy.layers[-1]
        head.W.data[:] = 0.0
        head.b.data[:] = 0.0

    def _check(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape[-1] != self.cfg.n_features:
            raise ContractError(f"observation has {obs.shape[-1]} features, expected {self.cfg.n_features}")
        return obs

    def action_probs(self, obs) -> np.ndarray:
        return softmax_array(self.policy.fast(self._check(obs)), axis=-1)

    def act(self, obs, rng: np.random.Generator, greedy: bool = False) -> int:
        # Hot path: called once per agent per game step, so skip the generic softmax.
        x = self.policy.fast(self._check(obs))
        if greedy:
            return int(x.argmax())
        c = np.exp(x - x.max()).cumsum()
        return int(min(c.searchsorted(rng.random() * c[-1], side="right"), len(c) - 1))

    def losses(self, trajectories: Sequence[Trajectory]):
        """(policy_loss, value_loss) tensors over all steps of ``trajectories``."""
        if not trajectories:
            raise ContractError("update needs at least one trajectory")
        obs = np.concatenate([np.asarray(t.observations, dtype=np.float64) for t in trajectories])
        acts = np.concatenate([np.asarray(t.actions, dtype=np.int64) for t in trajectories])
        rets = np.concatenate([discounted_returns(t.rewards, self.cfg.gamma) for t in trajectories])
        obs = self._check(obs)
        v = self.value(Tensor(obs))
        value_loss = T.tmean(T.mul(T.sub(T.reshape(v, (-1,)), rets), T.sub(T.reshape(v, (-1,)), rets)))
        if self.cfg.kind == "reinforce-baseline":
            adv = rets - v.data.reshape(-1)
        else:
            adv = rets
        logp = T.log_softmax(self.policy(Tensor(obs)), axis=-1)
        onehot = np.zeros((len(acts), self.cfg.n_actions))
        onehot[np.arange(len(acts)), acts] = 1.0
        chosen = T.tsum(T.mul(logp, onehot), axis=1)
        policy_loss = T.mul(T.tmean(T.mul(chosen, adv)), -1.0)
        if self.cfg.entropy_coef:
            ent = T.tmean(T.tsum(T.mul(T.exp(logp), logp), axis=1))
            policy_loss = T.add(policy_loss, T.mul(ent, self.cfg.entropy_coef))
        return policy_loss, value_loss

    def update(self, trajectories: Sequence[Trajectory]) -> dict[str, float]:
        trajectories = [t for t in trajectories if len(t)]
        policy_loss, value_loss = self.losses(trajectories)
        self.policy_opt.zero_grad()
        self.value_opt.zero_grad()
        policy_loss.backward()
        self.policy_opt.step()
        if self.cfg.kind == "reinforce-baseline":
            value_loss.backward()
            self.value_opt.step()
        return {"policy_loss": float(policy_loss.data), "value_loss": float(value_loss.data)}

    def clone(self) -> "PolicyLearner":
        return copy.deepcopy(self)


@dataclass
class LearnerPolicy:
    """Adapter that lets a learner play GridCTF."""

    learner: PolicyLearner
    greedy: bool = False
    speed: int = 1
    needs_features: bool = field(default=True, init=False)

    def act(self, state, team, slot, features, rng) -> int:
        return self.learner.act(features, rng, self.greedy)
