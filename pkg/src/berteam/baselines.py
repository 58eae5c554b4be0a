"""Comparison baselines: an MCAA-style mainland team selector and adapted MAP-Elites.

The mainland keeps, for every team slot, a categorical over islands that
tracks which islands winning teams came from (an exponential moving average
of winner frequencies).  Within an island an agent is drawn by softmax of its
moving-average team outcome.  Slots are sampled independently, so the team
distribution always factorizes across positions.

MAP-Elites is adapted to a fixed-size population: behaviorally unique agents
are protected, every other agent is judged by its fitness relative to its
behavioral neighbors, and ``n_rem`` of them are deleted stochastically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .coevolution import CoevConfig, PopulationMember, apply_replacements, clone_probabilities, refresh_elites
from .model import ContractError


@dataclass
class MainlandDistribution:
    slot_probs: np.ndarray  # (k, n_islands)
    fitness: np.ndarray  # moving-average outcome per agent
    ema_alpha: float = 0.1

    def __post_init__(self):
        self.slot_probs = np.asarray(self.slot_probs, dtype=np.float64)
        self.fitness = np.asarray(self.fitness, dtype=np.float64)
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ContractError("ema_alpha must lie in (0, 1]")
        if np.any(np.abs(self.slot_probs.sum(axis=1) - 1.0) > 1e-9):
            raise ContractError("each slot's island probabilities must sum to 1")

    @classmethod
    def uniform(cls, k: int, n_islands: int, n_agents: int, ema_alpha: float = 0.1, initial_fitness: float = 0.5):
        return cls(np.full((k, n_islands), 1.0 / n_islands), np.full(n_agents, initial_fitness), ema_alpha)

    @property
    def k(self) -> int:
        return self.slot_probs.shape[0]


def mcaa_update(dist: MainlandDistribution, winning_teams: Sequence[Sequence[tuple[int, int]]]) -> None:
    """Fold the per-slot island frequencies of this round's winners into the EMA."""
    if not winning_teams:
        return
    freq = np.zeros_like(dist.slot_probs)
    for team in winning_teams:
        if len(team) != dist.k:
            raise ContractError(f"winning team has {len(team)} members, expected {dist.k}")
        for slot, (_, island) in enumerate(team):
            freq[slot, island] += 1.0
    freq /= len(winning_teams)
    a = dist.ema_alpha
    dist.slot_probs = (1.0 - a) * dist.slot_probs + a * freq


def update_agent_fitness_moving_avg(dist: MainlandDistribution, agent_id: int, outcome: float, ema_alpha: float | None = None) -> None:
    if not 0.0 <= outcome <= 1.0:
        raise ContractError(f"outcome must lie in [0, 1], got {outcome}")
    a = dist.ema_alpha if ema_alpha is None else ema_alpha
    dist.fitness[agent_id] = (1.0 - a) * dist.fitness[agent_id] + a * outcome


def _island_probs(dist: MainlandDistribution, islands: Sequence[Sequence[int]], slot: int) -> np.ndarray:
    # An empty island can never yield an agent; redrawing until a nonempty
    # island comes up is the same as renormalizing over nonempty islands.
    p = dist.slot_probs[slot] * np.array([len(isl) > 0 for isl in islands], dtype=np.float64)
    if p.sum() <= 0:
        raise ContractError("every island with positive probability is empty")
    return p / p.sum()


def _within_island(dist: MainlandDistribution, island: Sequence[int], temperature: float) -> np.ndarray:
    f = dist.fitness[list(island)] / temperature
    z = np.exp(f - f.max())
    return z / z.sum()


def mcaa_sample_team(
    dist: MainlandDistribution,
    islands: Sequence[Sequence[int]],
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> tuple[tuple[int, ...], float]:
    """Sample one team slot by slot; returns (team, probability of that team)."""
    if not any(len(isl) for isl in islands):
        raise ContractError("all islands are empty")
    team, prob = [], 1.0
    for slot in range(dist.k):
        pi = _island_probs(dist, islands, slot)
        isl = int(rng.choice(len(islands), p=pi))
        pa = _within_island(dist, islands[isl], temperature)
        j = int(rng.choice(len(pa), p=pa))
        team.append(int(islands[isl][j]))
        prob *= pi[isl] * pa[j]
    return tuple(team), prob


def mcaa_team_probability(dist, islands, team, temperature: float = 1.0) -> float:
    island_of = {a: i for i, isl in enumerate(islands) for a in isl}
    prob = 1.0
    for slot, agent in enumerate(team):
        isl = island_of[agent]
        pi = _island_probs(dist, islands, slot)
        pa = _within_island(dist, islands[isl], temperature)
        prob *= pi[isl] * pa[list(islands[isl]).index(agent)]
    return prob


class MCAASelector:
    """Mainland team selector over a population partitioned into islands."""

    name = "mcaa"

    def __init__(self, island_of: Sequence[int], k: int, ema_alpha: float = 0.1, temperature: float = 1.0):
        self.island_of = [int(i) for i in island_of]
        self.n_islands = max(self.island_of) + 1
        self.dist = MainlandDistribution.uniform(k, self.n_islands, len(self.island_of), ema_alpha)
        self.temperature = temperature
        self._winners: list = []

    @property
    def islands(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_islands)]
        for agent, isl in enumerate(self.island_of):
            out[isl].append(agent)
        return out

    def sample(self, n, k, rng, explore=True):
        if k != self.dist.k:
            raise ContractError(f"selector built for teams of {self.dist.k}, asked for {k}")
        islands = self.islands
        teams = np.zeros((n, k), dtype=np.int64)
        probs = np.zeros(n)
        for i in range(n):
            team, p = mcaa_sample_team(self.dist, islands, rng, self.temperature)
            teams[i] = team
            probs[i] = p
        return teams, probs

    def record(self, teams, outcomes, probs, epoch):
        for team, out in zip(teams, outcomes):
            for agent in team:
                update_agent_fitness_moving_avg(self.dist, int(agent), float(out))
            if out > 0.5:
                self._winners.append([(int(a), self.island_of[int(a)]) for a in team])

    def end_epoch(self, epoch, rng):
        n = len(self._winners)
        mcaa_update(self.dist, self._winners)
        self._winners = []
        return {"winners": n} if n else {}

    def on_replace(self, removed, source):
        # The clone carries its source's learner, hence its source's island.
        self.island_of[removed] = self.island_of[source]
        self.dist.fitness[removed] = self.dist.fitness[source]


# -- MAP-Elites --------------------------------------------------------------


def _as_matrix(behaviors: Mapping[int, Sequence[float] | float]) -> tuple[list[int], np.ndarray]:
    ids = sorted(behaviors)
    b = np.array([np.atleast_1d(np.asarray(behaviors[i], dtype=np.float64)) for i in ids])
    return ids, b


def _distances(b: np.ndarray) -> np.ndarray:
    d = np.sqrt(((b[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(d, np.inf)
    return d


def me_unique(behaviors: Mapping[int, Sequence[float] | float], lam: float, max_unique: int | None = None) -> tuple[set[int], float]:
    """Agents whose behavior is more than ``lam`` from every other; returns (uniques, lam used).

    When ``max_unique`` is set and exceeded, ``lam`` doubles until it is not.
    """
    if not lam > 0:
        raise ContractError("lambda must be > 0")
    ids, b = _as_matrix(behaviors)
    if len(ids) < 2:
        return set(ids), lam
    nearest = _distances(b).min(axis=1)
    while True:
        uniq = {ids[i] for i in np.flatnonzero(nearest > lam)}
        if max_unique is None or len(uniq) <= max_unique:
            return uniq, lam
        lam *= 2.0


def neighborhood_fitness(behaviors: Mapping[int, Sequence[float] | float], fitness: Mapping[int, float], lam: float) -> dict[int, float]:
    """Mean fitness of each agent's neighbors within ``lam`` (itself excluded).

    Agents without neighbors fall back to the population mean fitness.
    """
    ids, b = _as_matrix(behaviors)
    d = _distances(b)
    f = np.array([fitness[i] for i in ids])
    mean = float(f.mean())
    out = {}
    for row, i in enumerate(ids):
        near = d[row] <= lam
        out[i] = float(f[near].mean()) if near.any() else mean
    return out


def me_removal_probabilities(fitness, predicted, uniques, tau: float) -> dict[int, float]:
    ids = sorted(fitness)
    cand = [i for i in ids if i not in uniques]
    if not cand:
        raise ContractError("no removable (non-unique) agent")
    rel = np.array([fitness[i] - predicted[i] for i in cand]) / tau
    z = np.exp(-(rel - rel.min()))
    z /= z.sum()
    probs = {i: 0.0 for i in ids}
    probs.update({i: float(p) for i, p in zip(cand, z)})
    return probs


def me_select_removals(
    fitness: Mapping[int, float],
    predicted: Mapping[int, float],
    uniques: set[int],
    n_rem: int,
    tau: float,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> list[int]:
    """Delete ``n_rem`` non-unique agents by softmax of negative relative fitness.

    ``deterministic`` removes the lowest relative fitness instead (the
    original, non-stochastic MAP-Elites rule; meant for sanity checks).
    """
    if not tau > 0:
        raise ContractError("tau must be > 0")
    cand = [i for i in sorted(fitness) if i not in uniques]
    if len(cand) < n_rem:
        raise ContractError(f"only {len(cand)} non-unique agents, cannot remove {n_rem}")
    if n_rem == 0:
        return []
    if deterministic:
        rel = [(fitness[i] - predicted[i], i) for i in cand]
        return [i for _, i in sorted(rel)[:n_rem]]
    probs = me_removal_probabilities(fitness, predicted, uniques, tau)
    p = np.array([probs[i] for i in cand])
    return [int(x) for x in rng.choice(cand, size=n_rem, replace=False, p=p)]


@dataclass
class MapElitesConfig:
    lam: float = 0.5
    max_unique_fraction: float = 0.5
    deterministic: bool = False


@dataclass
class MapElitesUpdate:
    """Population update that runs adapted MAP-Elites inside every island.

    ``behavior_fn(member) -> float`` projects an agent into behavior space.
    Clones come from the same island, chosen by softmax of fitness.
    """

    island_of: list[int]
    behavior_fn: object
    cfg: MapElitesConfig = field(default_factory=MapElitesConfig)
    n_elites_per_island: int = 1
    last_behaviors: dict[int, float] = field(default_factory=dict)

    def __call__(self, pop: list[PopulationMember], cfg: CoevConfig, rng: np.random.Generator) -> list[tuple[int, int]]:
        refresh_elites(pop, 0)
        behaviors = {m.agent_id: float(self.behavior_fn(m)) for m in pop}
        self.last_behaviors = behaviors
        pairs: list[tuple[int, int]] = []
        for isl in sorted(set(self.island_of)):
            members = [m.agent_id for m in pop if self.island_of[m.agent_id] == isl]
            if len(members) < 2:
                continue
            sub_b = {i: behaviors[i] for i in members}
            fit = {i: pop[i].fitness for i in members}
            cap = max(0, int(self.cfg.max_unique_fraction * len(members)))
            uniq, lam = me_unique(sub_b, self.cfg.lam, max_unique=cap)
            f_sorted = sorted(members, key=lambda i: -fit[i])
            elites = set(f_sorted[: self.n_elites_per_island])
            for i in elites:
                pop[i].is_elite = True
            protected = uniq | elites
            if len([i for i in members if i not in protected]) < cfg.n_rem:
                continue
            pred = neighborhood_fitness(sub_b, fit, lam)
            removed = me_select_removals(fit, pred, protected, cfg.n_rem, cfg.softmax_temperature, rng, self.cfg.deterministic)
            p_clone = clone_probabilities([fit[i] for i in members], cfg.softmax_temperature)
            sources = rng.choice(members, size=len(removed), p=p_clone)
            pairs.extend((int(r), int(s)) for r, s in zip(removed, sources))
        apply_replacements(pop, pairs)
        for r, s in pairs:
            if r != s:
                self.island_of[r] = self.island_of[s]
        return pairs
