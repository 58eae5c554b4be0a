"""The team transformer: an encoder-decoder over agent tokens trained by MLM.

Teams are token sequences.  A query takes a partially masked team (plus an
optional observation sequence for the encoder) and returns, for every team
slot, a distribution over agents.  Teams are generated by starting fully
masked and filling one slot per query.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .nn import tensor as T
from .nn.layers import (
    ArchConfig,
    DecoderLayer,
    Embedding,
    EncoderLayer,
    LayerNorm,
    Linear,
    Module,
    iter_dropouts,
    param,
)
from .nn.optim import Adam
from .nn.tensor import NumericError, Tensor, no_grad, softmax_array

TeamSequence = tuple[int, ...]


class ContractError(ValueError):
    """Caller violated an operation's precondition."""


@dataclass(frozen=True)
class AgentVocab:
    n_agents: int

    @property
    def mask(self) -> int:
        return self.n_agents

    @property
    def null_obs(self) -> int:
        return self.n_agents + 1

    @property
    def size(self) -> int:
        return self.n_agents + 2

    def check_team(self, team: Sequence[int]) -> TeamSequence:
        team = tuple(int(t) for t in team)
        if any(t < 0 or t >= self.n_agents for t in team):
            raise ContractError(f"team {team} contains non-agent tokens (n_agents={self.n_agents})")
        return team


@dataclass
class MaskedExample:
    target: TeamSequence
    mask_positions: tuple[int, ...]
    observation: np.ndarray | None = None
    weight: float = 1.0

    def __post_init__(self):
        if not self.mask_positions:
            raise ContractError("mask_positions must be nonempty")
        if not self.weight > 0:
            raise ContractError(f"example weight must be positive, got {self.weight}")


@dataclass
class GenerationPolicy:
    unmask_order: str = "random"  # or "left-to-right"
    temperature: float = 1.0
    noise_epsilon: float = 0.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ContractError("temperature must be > 0")
        if self.unmask_order not in ("random", "left-to-right"):
            raise ContractError(f"unknown unmask_order {self.unmask_order!r}")
        if not 0.0 <= self.noise_epsilon <= 1.0:
            raise ContractError("noise_epsilon must lie in [0, 1]")


GREEDY_TEMPERATURE = 1e-6


def random_mask(k: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Mask size m ~ U{1..k}, then a uniform size-m subset of positions."""
    m = int(rng.integers(1, k + 1))
    return tuple(sorted(int(i) for i in rng.choice(k, size=m, replace=False)))


def temper(probs: np.ndarray, temperature: float) -> np.ndarray:
    if temperature == 1.0:
        return probs
    if temperature <= GREEDY_TEMPERATURE:
        out = np.zeros_like(probs)
        out[np.arange(len(probs)), probs.argmax(axis=-1)] = 1.0
        return out
    with np.errstate(divide="ignore"):
        logits = np.log(probs) / temperature
    return softmax_array(logits, axis=-1)


def sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row by inverse CDF."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(len(probs)) * cdf[:, -1]
    return np.minimum((cdf <= u[:, None]).sum(axis=-1), probs.shape[-1] - 1)


class BERTeam(Module):
    def __init__(self, n_agents: int, max_team_size: int, cfg: ArchConfig | None = None, seed: int = 0):
        cfg = cfg or ArchConfig()
        self.cfg = cfg
        self.vocab = AgentVocab(n_agents)
        self.max_team_size = max_team_size
        rng = np.random.default_rng(seed)
        d = cfg.embed_dim
        self.tok_embed = Embedding(self.vocab.size, d, rng)
        self.pos_embed = param(rng.normal(0.0, 0.02, size=(max_team_size, d)))
        self.encoder = [EncoderLayer(cfg, rng) for _ in range(cfg.n_encoder_layers)]
        self.decoder = [DecoderLayer(cfg, rng) for _ in range(cfg.n_decoder_layers)]
        self.enc_norm = LayerNorm(d)
        self.dec_norm = LayerNorm(d)
        self.head = Linear(d, n_agents, rng)
        self.dropout_rng = np.random.default_rng(rng.integers(2**63))
        for drop in iter_dropouts(self):
            drop.rng = self.dropout_rng
        self.optimizer: Adam | None = None

    @property
    def n_agents(self) -> int:
        return self.vocab.n_agents

    def zero_output_head(self) -> None:
        self.head.W.data[:] = 0.0
        self.head.b.data[:] = 0.0

    # -- forward -----------------------------------------------------------

    def _memory(self, batch: int, observations) -> tuple[Tensor, np.ndarray | None]:
        null = self.vocab.null_obs
        if observations is None or all(o is None or len(o) == 0 for o in observations):
            x = self.tok_embed(np.array([[null]]))
            mask = None
        else:
            if len(observations) != batch:
                raise ContractError(f"got {len(observations)} observations for a batch of {batch}")
            d = self.cfg.embed_dim
            lens = [1 if o is None or len(o) == 0 else len(o) for o in observations]
            L = max(lens)
            ids = np.full((batch, L), null)
            is_tok = np.zeros((batch, L, 1))
            obs = np.zeros((batch, L, d))
            mask = np.zeros((batch, L), bool)
            for i, o in enumerate(observations):
                mask[i, : lens[i]] = True
                if o is None or len(o) == 0:
                    is_tok[i, 0] = 1.0
                else:
                    o = np.asarray(o, dtype=np.float64)
                    if o.ndim != 2 or o.shape[1] != d:
                        raise ContractError(f"observation vectors must have {d} entries, got shape {o.shape}")
                    obs[i, : len(o)] = o
            x = T.add(T.mul(self.tok_embed(ids), is_tok), obs)
        for layer in self.encoder:
            x = layer(x, mask)
        if self.cfg.norm_first:
            x = self.enc_norm(x)
        return x, mask

    def logits(self, tokens: np.ndarray, observations=None) -> Tensor:
        """(B, k) token ids -> (B, k, n_agents) logits."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2:
            raise ContractError(f"tokens must be (batch, k), got shape {tokens.shape}")
        b, k = tokens.shape
        if not 1 <= k <= self.max_team_size:
            raise ContractError(f"team length {k} outside [1, {self.max_team_size}]")
        if tokens.min() < 0 or tokens.max() > self.vocab.mask:
            raise ContractError("decoder tokens must be agent ids or MASK")
        memory, mem_mask = self._memory(b, observations)
        x = T.add(self.tok_embed(tokens), T.take(self.pos_embed, np.arange(k), axis=0))
        for layer in self.decoder:
            x = layer(x, memory, mem_mask)
        if self.cfg.norm_first:
            x = self.dec_norm(x)
        return self.head(x)

    def predict(self, tokens: np.ndarray, observations=None) -> np.ndarray:
        """Batched inference: probability rows (B, k, n_agents)."""
        was = self.training
        self.eval()
        with no_grad():
            out = self.logits(tokens, observations).data
        self.train(was)
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite logits")
        return softmax_array(out, axis=-1)

    def forward(self, partial: Sequence[int], observation=None, k: int | None = None) -> np.ndarray:
        """k probability rows over agents for one partially masked team."""
        partial = list(partial)
        if k is not None and len(partial) != k:
            raise ContractError(f"sequence length {len(partial)} != team size {k}")
        obs = None if observation is None else [observation]
        return self.predict(np.array([partial]), obs)[0]

    def captain_distribution(self, k: int, observation=None) -> np.ndarray:
        if k < 1:
            raise ContractError("k must be >= 1")
        return self.forward([self.vocab.mask] * k, observation)[0]

    # -- training ----------------------------------------------------------

    def mlm_loss_arrays(self, inputs, labels, label_mask, weights, observations=None) -> Tensor:
        """Weighted CE over positions where ``label_mask`` is set; other labels are ignored."""
        logits = self.logits(inputs, observations)
        b, k, n = logits.shape
        flat = T.reshape(logits, (b * k, n))
        sel = np.flatnonzero(np.asarray(label_mask, bool).reshape(-1))
        if sel.size == 0:
            raise ContractError("no masked positions in batch")
        rows = T.take(flat, sel, axis=0)
        targets = np.asarray(labels).reshape(-1)[sel]
        w = np.repeat(np.asarray(weights, dtype=np.float64), k)[sel]
        return T.softmax_cross_entropy(rows, targets, w)

    def batch_arrays(self, batch: Sequence[MaskedExample]):
        if not batch:
            raise ContractError("empty batch")
        k = len(batch[0].target)
        if any(len(ex.target) != k for ex in batch):
            raise ContractError("all examples in a batch must share a team size")
        labels = np.array([ex.target for ex in batch], dtype=np.int64)
        label_mask = np.zeros_like(labels, dtype=bool)
        for i, ex in enumerate(batch):
            label_mask[i, list(ex.mask_positions)] = True
        inputs = np.where(label_mask, self.vocab.mask, labels)
        weights = np.array([ex.weight for ex in batch])
        obs = [ex.observation for ex in batch]
        if all(o is None for o in obs):
            obs = None
        return inputs, labels, label_mask, weights, obs

    def mlm_loss(self, batch: Sequence[MaskedExample]) -> Tensor:
        return self.mlm_loss_arrays(*self.batch_arrays(batch))

    def make_optimizer(self, lr: float = 1e-3) -> Adam:
        self.optimizer = Adam(self.parameters(), lr=lr)
        return self.optimizer

    def mlm_train_step(self, batch: Sequence[MaskedExample], optimizer: Adam | None = None) -> float:
        """One optimizer step on the batch; returns the pre-step loss."""
        opt = optimizer or self.optimizer or self.make_optimizer()
        self.train()
        opt.zero_grad()
        loss = self.mlm_loss(batch)
        loss.backward()
        opt.step()
        return float(loss.data)

    # -- generation --------------------------------------------------------

    def noisy_captain_sample(self, k: int, policy: GenerationPolicy, rng: np.random.Generator, size: int = 1, observation=None):
        """Captains from (1-eps)*captain_distribution + eps*uniform; returns (ids, probs)."""
        eps = policy.noise_epsilon
        dist = self.captain_distribution(k, observation)
        mix = (1.0 - eps) * dist + eps / self.n_agents
        ids = sample_rows(np.broadcast_to(mix, (size, self.n_agents)), rng)
        return ids, mix[ids]

    def generate(
        self,
        n: int,
        k: int,
        policy: GenerationPolicy,
        rng: np.random.Generator,
        observation=None,
        captains: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Generate ``n`` teams; returns (teams (n, k), realized-path probabilities).

        With ``captains`` given, slot 0 is fixed and the returned probability is
        conditional on it.
        """
        if k < 1:
            raise ContractError("k must be >= 1")
        tokens = np.full((n, k), self.vocab.mask, dtype=np.int64)
        first = 0
        if captains is not None:
            tokens[:, 0] = captains
            first = 1
        free = k - first
        if policy.unmask_order == "random":
            order = np.argsort(rng.random((n, free)), axis=1) + first
        else:
            order = np.broadcast_to(np.arange(first, k), (n, free))
        logp = np.zeros(n)
        obs = None if observation is None else [observation] * n
        rows_idx = np.arange(n)
        for step in range(free):
            probs = self.predict(tokens, obs)
            pos = order[:, step]
            rows = temper(probs[rows_idx, pos], policy.temperature)
            choice = sample_rows(rows, rng)
            with np.errstate(divide="ignore"):
                logp += np.log(rows[rows_idx, choice])
            tokens[rows_idx, pos] = choice
        return tokens, np.exp(logp)

    def generate_team(self, k: int, observation=None, policy: GenerationPolicy | None = None, rng=None) -> TeamSequence:
        policy = policy or GenerationPolicy()
        rng = rng if rng is not None else np.random.default_rng()
        teams, _ = self.generate(1, k, policy, rng, observation)
        return tuple(int(t) for t in teams[0])

    # -- analysis ----------------------------------------------------------

    def agent_embeddings(self) -> np.ndarray:
        return self.tok_embed.weight.data[: self.n_agents]

    def embedding_cosine_stats(self, subset) -> float:
        return mean_pairwise_cosine(self.agent_embeddings()[sorted(subset)])


def mean_pairwise_cosine(vectors: np.ndarray) -> float:
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(vectors) < 2:
        raise ContractError("need at least two vectors")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0):
        raise NumericError("zero-norm embedding")
    unit = vectors / norms[:, None]
    sims = [float(unit[i] @ unit[j]) for i, j in combinations(range(len(unit)), 2)]
    return float(np.mean(sims))
