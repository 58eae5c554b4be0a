"""Coevolutionary training of an agent population alongside a team selector.

One epoch: sample teams (captain first, then the rest), play the games, move
captain fitness by an Elo update, feed outcomes to the selector(s), give
every agent one RL update from the trajectories it produced, and finally
replace a few low-fitness agents by clones of high-fitness ones.

Agent ids are token ids: a clone overwrites the removed agent's slot, so at
most ``n_rem`` tokens change meaning per generation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .elo import EloConfig, update_pair
from .games.base import GameResult, Trajectory
from .games.matrix import MatrixTeamGame
from .model import ContractError
from .rl import LearnerPolicy, PolicyLearner
from .selectors import TeamSelector


@dataclass
class CoevConfig:
    n_epochs: int = 300
    n_games: int = 10
    team_size: int = 2
    n_rem: int = 1
    protection_epochs: int = 500
    n_elites: int = 3
    softmax_temperature: float = 1.0
    generation_every: int = 1
    protect_initial: bool = False
    elo: EloConfig = field(default_factory=EloConfig)

    def __post_init__(self):
        if isinstance(self.elo, dict):
            self.elo = EloConfig(**self.elo)
        if self.n_rem < 0:
            raise ContractError("n_rem must be >= 0")
        if self.n_games < 0 or self.n_epochs < 0:
            raise ContractError("n_games and n_epochs must be >= 0")
        if self.team_size < 1:
            raise ContractError("team_size must be >= 1")
        if not self.softmax_temperature > 0:
            raise ContractError("softmax_temperature must be > 0")
        if self.n_elites < 0 or self.generation_every < 1:
            raise ContractError("n_elites must be >= 0 and generation_every >= 1")


@dataclass
class PopulationMember:
    agent_id: int
    policy: Any = None
    fitness: float = 0.0
    epochs_alive: int = 0
    is_elite: bool = False
    generation: int = 0  # 0 for initial agents, +1 for each clone overwrite

    @property
    def learns(self) -> bool:
        return isinstance(self.policy, PolicyLearner)


def make_population(policies: Sequence[Any]) -> list[PopulationMember]:
    return [PopulationMember(i, p) for i, p in enumerate(policies)]


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()


def clone_probabilities(fitnesses, tau: float) -> np.ndarray:
    """softmax(f / tau) with max subtraction."""
    if not tau > 0:
        raise ContractError("tau must be > 0")
    return _softmax(np.asarray(fitnesses, dtype=np.float64) / tau)


def removal_probabilities(fitnesses, tau: float, protected=frozenset(), elites=frozenset()) -> np.ndarray:
    """softmax(-f / tau) over agents that are neither protected nor elite."""
    if not tau > 0:
        raise ContractError("tau must be > 0")
    f = np.asarray(fitnesses, dtype=np.float64)
    ok = np.array([i not in protected and i not in elites for i in range(len(f))])
    if not ok.any():
        raise ContractError("no removable agent: every agent is protected or elite")
    out = np.zeros(len(f))
    out[ok] = _softmax(-f[ok] / tau)
    return out


def elite_ids(pop: Sequence[PopulationMember], n_elites: int) -> set[int]:
    f = np.array([m.fitness for m in pop])
    order = np.argsort(-f, kind="stable")
    return {pop[i].agent_id for i in order[:n_elites]}


def protected_ids(pop: Sequence[PopulationMember], cfg: CoevConfig) -> set[int]:
    return {
        m.agent_id
        for m in pop
        if m.epochs_alive < cfg.protection_epochs and (m.generation > 0 or cfg.protect_initial)
    }


def refresh_elites(pop: Sequence[PopulationMember], n_elites: int) -> set[int]:
    elites = elite_ids(pop, n_elites)
    for m in pop:
        m.is_elite = m.agent_id in elites
    return elites


def copy_policy(policy):
    return policy.clone() if hasattr(policy, "clone") else policy


def apply_replacements(pop: list[PopulationMember], pairs: Sequence[tuple[int, int]]) -> None:
    """Overwrite each removed slot with a copy of its clone source.

    Sources are read from a snapshot taken before any overwrite, so the
    result does not depend on the order of ``pairs``.  A pair whose two ids
    coincide is a no-op.
    """
    snapshot = {m.agent_id: (m.policy, m.fitness) for m in pop}
    for removed, source in pairs:
        if removed == source:
            continue
        policy, fitness = snapshot[source]
        m = pop[removed]
        m.policy = copy_policy(policy)
        m.fitness = fitness
        m.epochs_alive = 0
        m.generation += 1


def generation_update(pop: list[PopulationMember], cfg: CoevConfig, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Sample ``n_rem`` removals and ``n_rem`` clones; returns (removed, cloned_from) pairs.

    Removals are drawn without replacement from the removable agents, clones
    with replacement from the whole population.  When fewer than ``n_rem``
    agents are removable only that many replacements happen (possibly none).
    """
    if cfg.n_rem == 0:
        return []
    f = np.array([m.fitness for m in pop])
    elites = refresh_elites(pop, cfg.n_elites)
    protected = protected_ids(pop, cfg)
    removable = [i for i in range(len(pop)) if i not in elites and i not in protected]
    n = min(cfg.n_rem, len(removable))
    if n == 0:
        return []
    p_rem = removal_probabilities(f, cfg.softmax_temperature, protected, elites)
    removed = rng.choice(len(pop), size=n, replace=False, p=p_rem)
    cloned = rng.choice(len(pop), size=n, p=clone_probabilities(f, cfg.softmax_temperature))
    pairs = [(int(r), int(c)) for r, c in zip(removed, cloned)]
    apply_replacements(pop, pairs)
    return pairs


def team_players(pop: Sequence[PopulationMember], game, team: Sequence[int]):
    """What ``game.play`` expects for one team: ids for matrix games, policies otherwise."""
    if isinstance(game, MatrixTeamGame):
        return tuple(int(i) for i in team)
    out = []
    for i in team:
        pol = pop[int(i)].policy
        out.append(LearnerPolicy(pol) if isinstance(pol, PolicyLearner) else pol)
    return out


@dataclass
class EpochReport:
    epoch: int
    games: list[dict] = field(default_factory=list)
    replacements: list[tuple[int, int]] = field(default_factory=list)
    mean_fitness: float = 0.0
    selector: dict = field(default_factory=dict)
    rl: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "games": self.games,
                "replacements": [list(p) for p in self.replacements],
                "mean_fitness": self.mean_fitness,
                "selector": self.selector,
                "rl": self.rl,
            },
            sort_keys=True,
        )


def run_epoch(
    pop: list[PopulationMember],
    selector: TeamSelector,
    game,
    cfg: CoevConfig,
    rng: np.random.Generator,
    epoch: int = 0,
    shadows: Sequence[TeamSelector] = (),
    population_update: Callable[[list[PopulationMember], CoevConfig, np.random.Generator], list[tuple[int, int]]]
    | None = None,
) -> EpochReport:
    """One epoch of selector-driven games, fitness/RL updates and a generation update."""
    k = cfg.team_size
    report = EpochReport(epoch)
    trajs: dict[int, list[Trajectory]] = {}
    if cfg.n_games:
        try:
            teams, probs = selector.sample(2 * cfg.n_games, k, rng)
        except Exception as exc:
            raise RuntimeError(f"selector {selector.name!r} failed to sample teams in epoch {epoch}") from exc
        outcomes = np.zeros(2 * cfg.n_games)
        c = cfg.elo.scale_at(epoch)
        for g in range(cfg.n_games):
            pair = teams[2 * g : 2 * g + 2]
            try:
                res: GameResult = game.play([team_players(pop, game, t) for t in pair], rng)
            except Exception as exc:
                raise RuntimeError(f"game {g} of epoch {epoch} failed for teams {pair.tolist()}") from exc
            outcomes[2 * g : 2 * g + 2] = res.outcome
            for (t, s), tr in res.trajectories.items():
                if len(tr):
                    trajs.setdefault(int(pair[t][s]), []).append(tr)
            cap0, cap1 = int(pair[0][0]), int(pair[1][0])
            if cap0 != cap1:
                pop[cap0].fitness, pop[cap1].fitness = update_pair(pop[cap0].fitness, pop[cap1].fitness, float(res.outcome[0]), c)
            report.games.append(
                {
                    "teams": pair.tolist(),
                    "captains": [cap0, cap1],
                    "outcome": [float(o) for o in res.outcome],
                    "selection_prob": [float(p) for p in probs[2 * g : 2 * g + 2]],
                }
            )
        for sel in (selector, *shadows):
            sel.record(teams, outcomes, probs, epoch)
        for agent_id in sorted(trajs):
            m = pop[agent_id]
            if m.learns:
                report.rl[str(agent_id)] = m.policy.update(trajs[agent_id])
    for sel in (selector, *shadows):
        info = sel.end_epoch(epoch, rng)
        if info:
            report.selector[sel.name] = info
    for m in pop:
        m.epochs_alive += 1
    if (epoch + 1) % cfg.generation_every == 0:
        update = population_update or generation_update
        report.replacements = update(pop, cfg, rng)
        for removed, source in report.replacements:
            if removed != source:
                for sel in (selector, *shadows):
                    sel.on_replace(removed, source)
    else:
        refresh_elites(pop, cfg.n_elites)
    report.mean_fitness = float(np.mean([m.fitness for m in pop]))
    return report
