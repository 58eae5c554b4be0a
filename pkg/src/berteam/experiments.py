"""Experiment pipelines: fixed-policy selection, coevolution, the selector comparison grid, and fictitious play.

Every run writes into one directory:

* ``config.yaml``          the fully resolved configuration
* ``epochs*.jsonl``        one JSON line per epoch (games, replacements, fitness)
* ``distributions.jsonl``  BERTeam distribution snapshots
* ``*.csv`` / ``summary.json``  tables and headline numbers
* ``checkpoint*.bin``      final run state
* ``timings.json``         wall-clock numbers (the only non-deterministic file)

Training saves ``run_state*.bin`` at every snapshot and, if an epoch raises,
the state as of the last completed epoch before re-raising.  ``resume=True``
continues from that file.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analysis
from .baselines import MapElitesConfig, MapElitesUpdate, MCAASelector, mcaa_team_probability
from .checkpoint import dumps_checkpoint, load_checkpoint, optimizer_tensors, restore_optimizer, save_checkpoint
from .coevolution import PopulationMember, make_population, run_epoch, team_players
from .config import ExperimentConfig, dump_yaml
from .elo import EloConfig, anchor_mean, fit_against_references, fit_bradley_terry
from .games.aggression import evaluate_agent_aggression
from .games.gridctf import GridCTF
from .games.matrix import MatrixTeamGame, seven_policy_fixture
from .games.scripted import FIXED_POLICY_KINDS, scripted_policy
from .model import BERTeam, ContractError, GenerationPolicy
from .nash import CoachGame, fictitious_play, matching_pennies, rock_paper_scissors
from .replay import ReplayBuffer, WeightedExample
from .rl import LearnerConfig, LearnerPolicy, PolicyLearner
from .selectors import BERTeamSelector

# -- construction ------------------------------------------------------------


def seeds_for(seed: int, n: int) -> list[int]:
    """``n`` independent 63-bit integer seeds derived from one run seed."""
    return [int(s.generate_state(1, np.uint64)[0] >> np.uint64(1)) for s in np.random.SeedSequence(seed).spawn(n)]


def build_game(cfg: ExperimentConfig):
    g, k = cfg.game, cfg.coev.team_size
    if g.kind == "matrix":
        return seven_policy_fixture(team_size=k)
    return GridCTF(g.width, g.height, g.max_steps, k, g.shaping)


def build_berteam(cfg: ExperimentConfig, n_agents: int, seed: int) -> BERTeamSelector:
    s = cfg.selector
    model = BERTeam(n_agents, cfg.coev.team_size, s.arch, seed=seed)
    buffer = ReplayBuffer(s.buffer_capacity, s.buffer_mode, s.max_weight)
    policy = GenerationPolicy(s.unmask_order, s.temperature, s.noise_epsilon)
    return BERTeamSelector(model, buffer, policy, s.training)


def contiguous_islands(n_agents: int, n_islands: int) -> list[int]:
    """Agent i lives on island floor(i * n_islands / n_agents)."""
    if not 1 <= n_islands <= n_agents:
        raise ContractError("need 1 <= n_islands <= n_agents")
    return [i * n_islands // n_agents for i in range(n_agents)]


def island_learner_configs(cfg: ExperimentConfig, island_of: Sequence[int]) -> list[LearnerConfig]:
    """Per-agent learner settings: island-specific for the comparison grid, shared otherwise."""
    base = cfg.learner
    if cfg.kind != "comparison":
        return [base] * len(island_of)
    table = cfg.comparison.island_learners
    out = []
    for isl in island_of:
        kind, hidden = table[isl % len(table)]
        out.append(LearnerConfig(kind, tuple(hidden), base.lr, base.value_lr, base.gamma, base.entropy_coef, base.n_features, base.n_actions))
    return out


def build_population(cfg: ExperimentConfig, game, seeds: Sequence[int], island_of: Sequence[int] | None = None) -> list[PopulationMember]:
    if isinstance(game, MatrixTeamGame):
        n = 1 + max(max(t) for t in game.teams)
        if cfg.n_agents != n:
            raise ContractError(f"the matrix fixture has {n} agents, config asks for {cfg.n_agents}")
        return make_population([None] * n)
    island_of = island_of or [0] * cfg.n_agents
    cfgs = island_learner_configs(cfg, island_of)
    return make_population([PolicyLearner(c, seed=s) for c, s in zip(cfgs, seeds)])


# -- reference teams and Elo estimates ---------------------------------------


@dataclass
class ReferenceSet:
    """Scripted teams with Bradley-Terry ratings (natural units) from a round robin."""

    teams: list[tuple[str, ...]]
    ratings: np.ndarray
    wins: np.ndarray

    def display(self, elo: EloConfig) -> dict[str, float]:
        return anchor_mean({"+".join(t): float(r) for t, r in zip(self.teams, self.ratings)}, elo)

    def rows(self, elo: EloConfig) -> list[dict]:
        shown = self.display(elo)
        return [
            {"team": "+".join(t), "natural_rating": float(r), "display_rating": shown["+".join(t)], "games": int(self.wins[i].sum() + self.wins[:, i].sum())}
            for i, (t, r) in enumerate(zip(self.teams, self.ratings))
        ]


def reference_team_kinds(k: int) -> list[tuple[str, ...]]:
    return list(itertools.combinations_with_replacement(FIXED_POLICY_KINDS, k))


def scripted_team(kinds: Sequence[str], epsilon: float) -> list:
    return [scripted_policy(kind, epsilon) for kind in kinds]


def play_pair(game, team_a, team_b, rng: np.random.Generator, swap: bool) -> float:
    """Outcome for ``team_a``; ``swap`` puts it on side 1."""
    if swap:
        return float(game.play([team_b, team_a], rng).outcome[1])
    return float(game.play([team_a, team_b], rng).outcome[0])


def reference_tournament(game: GridCTF, k: int, games_per_pair: int, epsilon: float, prior: float, rng: np.random.Generator, kinds: Sequence[tuple[str, ...]] | None = None) -> ReferenceSet:
    """Round robin among scripted teams, sides alternating, fitted by Bradley-Terry."""
    teams = list(kinds or reference_team_kinds(k))
    n = len(teams)
    wins = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        for g in range(games_per_pair):
            s = play_pair(game, scripted_team(teams[i], epsilon), scripted_team(teams[j], epsilon), rng, swap=bool(g % 2))
            wins[i, j] += s
            wins[j, i] += 1.0 - s
    return ReferenceSet(teams, fit_bradley_terry(wins, prior=prior), wins)


@dataclass
class ExpectedElo:
    rating: float  # natural units, same frame as the references
    stderr: float
    display: float  # anchored with the references' mean at the display anchor
    n_games: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MatchPlan:
    """Opponent and game seed for every evaluation game.

    Sharing one plan between selectors makes their estimates paired: both
    meet the same reference teams with the same game randomness, so the
    difference between them is much less noisy than either estimate.
    """

    opponents: np.ndarray
    game_seeds: np.ndarray

    @classmethod
    def draw(cls, n_refs: int, n_games: int, rng: np.random.Generator) -> "MatchPlan":
        return cls(rng.integers(n_refs, size=n_games), rng.integers(2**63, size=n_games, dtype=np.uint64))

    def __len__(self) -> int:
        return len(self.opponents)


def selector_expected_elo(
    selector,
    ref_ratings: np.ndarray,
    n_games: int,
    play_vs_reference: Callable[[Sequence[int], int, np.random.Generator, bool], float],
    k: int,
    rng: np.random.Generator,
    elo: EloConfig | None = None,
    prior_games: float = 1.0,
    plan: MatchPlan | None = None,
) -> ExpectedElo:
    """Rating of "a team drawn from this selector" against fixed-rating references.

    Each game pits a freshly sampled team (no exploration noise) against a
    reference team, uniformly drawn unless ``plan`` fixes the opponents and
    game seeds.  Reference ratings stay fixed; only the selector's rating is
    fitted.
    """
    elo = elo or EloConfig()
    ref_ratings = np.asarray(ref_ratings, dtype=np.float64)
    if plan is None:
        plan = MatchPlan.draw(len(ref_ratings), n_games, rng)
    elif len(plan) != n_games:
        raise ContractError(f"match plan has {len(plan)} games, asked for {n_games}")
    teams, _ = selector.sample(n_games, k, rng, explore=False)
    opps = plan.opponents
    outcomes = np.array(
        [play_vs_reference(teams[g], int(opps[g]), np.random.default_rng(int(plan.game_seeds[g])), bool(g % 2)) for g in range(n_games)]
    )
    fit = fit_against_references(ref_ratings[opps], outcomes, prior_games=prior_games, prior_rating=float(ref_ratings.mean()))
    shown = elo.anchor_mean + elo.display_scale * (fit.rating - float(ref_ratings.mean()))
    return ExpectedElo(fit.rating, fit.stderr, shown, n_games)


def population_team_elo(pop, game, k: int, games_per_team: int, prior: float, rng: np.random.Generator, teams: Sequence[tuple[int, ...]] | None = None):
    """Bradley-Terry ratings of unordered population teams from random pairings.

    Every round shuffles the teams and pairs neighbours, so each team plays
    ``games_per_team`` games (one sits out per round when the count is odd).
    """
    teams = list(teams or itertools.combinations_with_replacement(range(len(pop)), k))
    n = len(teams)
    wins = np.zeros((n, n))
    for _ in range(games_per_team):
        perm = rng.permutation(n)
        for a, b in zip(perm[0::2], perm[1::2]):
            s = play_pair(game, team_players(pop, game, teams[a]), team_players(pop, game, teams[b]), rng, swap=bool(rng.random() < 0.5))
            wins[a, b] += s
            wins[b, a] += 1.0 - s
    return teams, fit_bradley_terry(wins, prior=prior), wins


def true_team_ranking(game: MatrixTeamGame) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Exact expected outcomes between all unordered teams, fitted by Bradley-Terry."""
    teams, m = game.expected_outcome_matrix()
    wins = m.copy()
    np.fill_diagonal(wins, 0.0)
    return teams, fit_bradley_terry(wins)


def generation_distribution(model: BERTeam, k: int, unmask_order: str, rng: np.random.Generator, n_samples: int = 100_000) -> dict[tuple[int, ...], float]:
    """Exact ordered distribution when enumeration is feasible, else a sampling estimate."""
    if k <= analysis.MAX_EXACT_TEAM_SIZE:
        return analysis.exact_generation_distribution(model, k, unmask_order)
    teams, _ = model.generate(n_samples, k, GenerationPolicy(unmask_order), rng)
    counts: dict[tuple[int, ...], float] = {}
    for t in map(tuple, teams.tolist()):
        counts[t] = counts.get(t, 0.0) + 1.0 / n_samples
    return counts


def team_key(team: Sequence) -> str:
    return "-".join(str(int(t)) for t in team)


# -- run state ---------------------------------------------------------------


@dataclass
class PopulationRun:
    """Everything that changes during training, plus how to checkpoint it."""

    cfg: ExperimentConfig
    game: object
    pop: list[PopulationMember]
    selector: object
    shadows: list = field(default_factory=list)
    population_update: object = None
    rng: np.random.Generator = None
    epoch: int = 0

    def selectors(self) -> list:
        return [self.selector, *self.shadows]

    def berteam(self) -> BERTeamSelector | None:
        for s in self.selectors():
            if isinstance(s, BERTeamSelector):
                return s
        return None

    def mcaa(self) -> MCAASelector | None:
        for s in self.selectors():
            if isinstance(s, MCAASelector):
                return s
        return None

    def state(self) -> tuple[dict[str, np.ndarray], dict]:
        tensors: dict[str, np.ndarray] = {
            "pop.fitness": np.array([m.fitness for m in self.pop]),
            "pop.epochs_alive": np.array([m.epochs_alive for m in self.pop], dtype=np.float64),
            "pop.is_elite": np.array([m.is_elite for m in self.pop], dtype=np.float64),
            "pop.generation": np.array([m.generation for m in self.pop], dtype=np.float64),
        }
        meta: dict = {"epoch": self.epoch, "rng": self.rng.bit_generator.state, "learners": {}}
        for m in self.pop:
            if isinstance(m.policy, PolicyLearner):
                pre = f"agent.{m.agent_id:04d}"
                for name, arr in m.policy.state_dict().items():
                    tensors[f"{pre}.net.{name}"] = arr
                for tag, opt in (("popt", m.policy.policy_opt), ("vopt", m.policy.value_opt)):
                    t, om = optimizer_tensors(f"{pre}.{tag}", opt)
                    tensors.update(t)
                    meta[f"{pre}.{tag}"] = om
                c = m.policy.cfg
                meta["learners"][str(m.agent_id)] = {"kind": c.kind, "hidden": list(c.hidden)}
        bt = self.berteam()
        if bt is not None:
            for name, arr in bt.model.state_dict().items():
                tensors[f"berteam.model.{name}"] = arr
            t, om = optimizer_tensors("berteam.opt", bt.optimizer)
            tensors.update(t)
            meta["berteam.opt"] = om
            meta["berteam.dropout_rng"] = bt.model.dropout_rng.bit_generator.state
            entries = list(bt.buffer.entries)
            if any(e.observation is not None for e in entries):
                raise ContractError("checkpointing observation-conditioned buffers is not supported")
            k = self.cfg.coev.team_size
            tensors["berteam.buffer.teams"] = np.array([e.team for e in entries], dtype=np.float64).reshape(len(entries), k)
            tensors["berteam.buffer.weights"] = np.array([e.weight for e in entries])
            tensors["berteam.buffer.epochs"] = np.array([e.epoch_added for e in entries], dtype=np.float64)
        mc = self.mcaa()
        if mc is not None:
            tensors["mcaa.slot_probs"] = mc.dist.slot_probs
            tensors["mcaa.fitness"] = mc.dist.fitness
            meta["mcaa.island_of"] = list(mc.island_of)
        if isinstance(self.population_update, MapElitesUpdate):
            meta["map_elites.island_of"] = list(self.population_update.island_of)
        return tensors, meta

    def restore(self, tensors: dict[str, np.ndarray], meta: dict) -> None:
        self.epoch = int(meta["epoch"])
        self.rng.bit_generator.state = meta["rng"]
        for i, m in enumerate(self.pop):
            m.fitness = float(tensors["pop.fitness"][i])
            m.epochs_alive = int(tensors["pop.epochs_alive"][i])
            m.is_elite = bool(tensors["pop.is_elite"][i])
            m.generation = int(tensors["pop.generation"][i])
            spec = meta["learners"].get(str(i))
            if spec is None:
                continue
            base = self.cfg.learner
            lc = LearnerConfig(spec["kind"], tuple(spec["hidden"]), base.lr, base.value_lr, base.gamma, base.entropy_coef, base.n_features, base.n_actions)
            learner = PolicyLearner(lc, seed=0)
            pre = f"agent.{i:04d}"
            learner.load_state_dict({k[len(pre) + 5 :]: v for k, v in tensors.items() if k.startswith(f"{pre}.net.")})
            restore_optimizer(learner.policy_opt, f"{pre}.popt", tensors, meta[f"{pre}.popt"])
            restore_optimizer(learner.value_opt, f"{pre}.vopt", tensors, meta[f"{pre}.vopt"])
            m.policy = learner
        bt = self.berteam()
        if bt is not None:
            bt.model.load_state_dict({k[len("berteam.model.") :]: v for k, v in tensors.items() if k.startswith("berteam.model.")})
            restore_optimizer(bt.optimizer, "berteam.opt", tensors, meta["berteam.opt"])
            bt.model.dropout_rng.bit_generator.state = meta["berteam.dropout_rng"]
            bt.buffer.entries.clear()
            teams, w, ep = tensors["berteam.buffer.teams"], tensors["berteam.buffer.weights"], tensors["berteam.buffer.epochs"]
            bt.buffer.extend(WeightedExample(tuple(int(x) for x in t), float(wi), int(e)) for t, wi, e in zip(teams, w, ep))
        mc = self.mcaa()
        if mc is not None:
            mc.dist.slot_probs = tensors["mcaa.slot_probs"].copy()
            mc.dist.fitness = tensors["mcaa.fitness"].copy()
            mc.island_of = list(meta["mcaa.island_of"])
        if isinstance(self.population_update, MapElitesUpdate):
            self.population_update.island_of[:] = meta["map_elites.island_of"]

    def dumps(self) -> bytes:
        tensors, meta = self.state()
        return dumps_checkpoint(tensors, meta)


def _truncate_jsonl(path: Path, before_epoch: int) -> None:
    if not path.exists():
        return
    keep = [ln for ln in path.read_text().splitlines() if json.loads(ln)["epoch"] < before_epoch]
    path.write_text("".join(ln + "\n" for ln in keep))


def _append_jsonl(path: Path, obj: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(obj, sort_keys=True) + "\n")


def distribution_snapshot(model: BERTeam, k: int, unmask_order: str, epoch: int, rng: np.random.Generator) -> dict:
    ordered = generation_distribution(model, k, unmask_order, rng)
    unordered = analysis.unordered_aggregate(ordered, k)
    analysis.check_distribution(ordered)
    return {
        "epoch": epoch,
        "ordered": {team_key(t): p for t, p in sorted(ordered.items())},
        "unordered": {team_key(t): p for t, p in unordered.items()},
        "captain": [float(x) for x in model.captain_distribution(k)],
    }


def train_population(run: PopulationRun, out: Path, tag: str = "", resume: bool = False, on_epoch: Callable[[dict], None] | None = None) -> None:
    """Runs the remaining epochs, logging and snapshotting; checkpoints on failure."""
    cfg = run.cfg
    sfx = f"_{tag}" if tag else ""
    log, snaps, state_path = out / f"epochs{sfx}.jsonl", out / f"distributions{sfx}.jsonl", out / f"run_state{sfx}.bin"
    if resume and state_path.exists():
        run.restore(*load_checkpoint(state_path))
    else:
        run.epoch = 0
    for p in (log, snaps):
        if run.epoch == 0:
            p.unlink(missing_ok=True)
        else:
            _truncate_jsonl(p, run.epoch)
    bt = run.berteam()
    every = cfg.evaluation.snapshot_every
    while run.epoch < cfg.coev.n_epochs:
        epoch = run.epoch
        last_good = run.dumps()
        try:
            report = run_epoch(run.pop, run.selector, run.game, cfg.coev, run.rng, epoch, run.shadows, run.population_update)
        except BaseException:
            state_path.write_bytes(last_good)
            raise
        line = json.loads(report.to_json())
        line["fitness"] = [m.fitness for m in run.pop]
        _append_jsonl(log, line)
        if on_epoch:
            on_epoch(line)
        run.epoch += 1
        if bt is not None and every and (run.epoch % every == 0 or run.epoch == cfg.coev.n_epochs):
            _append_jsonl(snaps, distribution_snapshot(bt.model, cfg.coev.team_size, cfg.selector.unmask_order, epoch, run.rng))
        if every and run.epoch % every == 0:
            state_path.write_bytes(run.dumps())
    save_checkpoint(out / f"checkpoint{sfx}.bin", *run.state())
    state_path.unlink(missing_ok=True)


def fitness_rows(log: Path) -> list[dict]:
    rows = []
    for ln in log.read_text().splitlines():
        rec = json.loads(ln)
        for agent, f in enumerate(rec["fitness"]):
            rows.append({"epoch": rec["epoch"], "agent": agent, "fitness": f})
    return rows


# -- shared evaluation --------------------------------------------------------


def _reference_set(cfg: ExperimentConfig, game, rng) -> ReferenceSet:
    ev = cfg.evaluation
    return reference_tournament(game, cfg.coev.team_size, ev.reference_games_per_pair, cfg.game.scripted_epsilon, ev.bt_prior, rng)


def _vs_reference(run: PopulationRun, refs: ReferenceSet):
    eps = run.cfg.game.scripted_epsilon

    def play(team, ref_idx, rng, swap):
        return play_pair(run.game, team_players(run.pop, run.game, team), scripted_team(refs.teams[ref_idx], eps), rng, swap)

    return play


def aggression_scores(run: PopulationRun, rng: np.random.Generator) -> dict[int, float]:
    """Aggression metric of every agent playing as a team of its own copies against homogeneous scripted teams."""
    k, eps = run.cfg.coev.team_size, run.cfg.game.scripted_epsilon
    opponents = [scripted_team([kind] * k, eps) for kind in FIXED_POLICY_KINDS]
    reps = run.cfg.evaluation.aggression_reps
    return {m.agent_id: evaluate_agent_aggression(LearnerPolicy(m.policy), opponents, run.game, reps, rng, k) for m in run.pop}


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _start(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_yaml(cfg))
    return out


# -- experiment kinds --------------------------------------------------------


def run_fixed_policy(cfg: ExperimentConfig, resume: bool = False, log: Callable[[str], None] | None = None) -> dict:
    """BERTeam trained on a fixed population; compared with the exact team ranking."""
    out = _start(cfg)
    t0 = time.perf_counter()
    game = build_game(cfg)
    if not isinstance(game, MatrixTeamGame):
        raise ContractError("the fixed-policy experiment runs on the matrix fixture (game.kind: matrix)")
    k = cfg.coev.team_size
    s_model, s_run = seeds_for(cfg.seed, 2)
    pop = build_population(cfg, game, [])
    selector = build_berteam(cfg, cfg.n_agents, s_model)
    run = PopulationRun(cfg, game, pop, selector, rng=np.random.default_rng(s_run))
    train_population(run, out, resume=resume, on_epoch=_progress(log, cfg))
    t_train = time.perf_counter() - t0

    teams, true = true_team_ranking(game)
    dist = analysis.unordered_aggregate(analysis.exact_generation_distribution(selector.model, k, cfg.selector.unmask_order), k)
    true_order = analysis.top_teams(dict(zip(teams, true)), len(teams))
    model_order = analysis.top_teams(dist, len(dist))
    shown = anchor_mean({team_key(t): float(r) for t, r in zip(teams, true)}, cfg.coev.elo)
    rows = [
        {
            "team": team_key(t),
            "true_rank": true_order.index(t) + 1,
            "true_elo": shown[team_key(t)],
            "occurrence": dist.get(t, 0.0),
            "berteam_rank": model_order.index(t) + 1,
        }
        for t in true_order
    ]
    analysis.write_rows(out / "team_ranking.csv", rows)
    analysis.write_rows(out / "fitness.csv", fitness_rows(out / "epochs.jsonl"))
    top7 = len(set(true_order[:7]) & set(model_order[:7]))
    summary = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "true_best": team_key(true_order[0]),
        "berteam_best": team_key(model_order[0]),
        "rank1_correct": model_order[0] == true_order[0],
        "top7_overlap": top7,
        "berteam_top7": [team_key(t) for t in model_order[:7]],
        "true_top7": [team_key(t) for t in true_order[:7]],
        "buffer_size": len(selector.buffer),
    }
    write_json(out / "summary.json", summary)
    write_json(out / "timings.json", {"train_seconds": t_train, "total_seconds": time.perf_counter() - t0})
    return summary


def _progress(log, cfg):
    if log is None:
        return None
    every = max(1, cfg.coev.n_epochs // 10)

    def f(line):
        if (line["epoch"] + 1) % every == 0:
            log(f"epoch {line['epoch'] + 1}/{cfg.coev.n_epochs} mean fitness {line['mean_fitness']:.3f}")

    return f


def run_coevolution(cfg: ExperimentConfig, resume: bool = False, log: Callable[[str], None] | None = None) -> dict:
    """BERTeam drives a coevolving GridCTF population; an MCAA mainland selector shadows the same games."""
    out = _start(cfg)
    t0 = time.perf_counter()
    game = build_game(cfg)
    if isinstance(game, MatrixTeamGame):
        raise ContractError("the coevolution experiment needs a learning game (game.kind: gridctf)")
    k, n = cfg.coev.team_size, cfg.n_agents
    s_model, s_run, s_eval, *agent_seeds = seeds_for(cfg.seed, 3 + n)
    island_of = contiguous_islands(n, cfg.comparison.n_islands)
    pop = build_population(cfg, game, agent_seeds, island_of)
    selector = build_berteam(cfg, n, s_model)
    shadow = MCAASelector(island_of, k, cfg.comparison.ema_alpha, cfg.comparison.mcaa_temperature)
    run = PopulationRun(cfg, game, pop, selector, [shadow], rng=np.random.default_rng(s_run))
    train_population(run, out, resume=resume, on_epoch=_progress(log, cfg))
    t_train = time.perf_counter() - t0

    rng = np.random.default_rng(s_eval)
    ev = cfg.evaluation
    refs = _reference_set(cfg, game, rng)
    analysis.write_rows(out / "reference_elo.csv", refs.rows(cfg.coev.elo))
    play = _vs_reference(run, refs)
    plan = MatchPlan.draw(len(refs.teams), ev.expected_elo_games, rng)
    expected = {
        sel.name: selector_expected_elo(sel, refs.ratings, ev.expected_elo_games, play, k, rng, cfg.coev.elo, plan=plan)
        for sel in (selector, shadow)
    }
    analysis.write_rows(out / "selector_comparison.csv", [{"selector": name, **e.as_dict()} for name, e in expected.items()])

    ordered = generation_distribution(selector.model, k, cfg.selector.unmask_order, rng)
    occurrence = analysis.unordered_aggregate(ordered, k)
    teams, team_r, team_w = population_team_elo(pop, game, k, ev.team_elo_games, ev.bt_prior, rng)
    shown = anchor_mean({team_key(t): float(r) for t, r in zip(teams, team_r)}, cfg.coev.elo)
    analysis.write_rows(
        out / "team_elo.csv",
        [{"team": team_key(t), "occurrence": occurrence.get(t, 0.0), "natural_rating": float(r), "display_rating": shown[team_key(t)]} for t, r in zip(teams, team_r)],
    )
    try:
        corr = analysis.occurrence_elo_correlation([occurrence.get(t, 0.0) for t in teams], team_r).as_dict()
    except ContractError as exc:
        corr = {"error": str(exc)}
    mcaa_check = _mcaa_factorization_error(shadow, k)

    aggr = aggression_scores(run, rng)
    clusters = analysis.two_means_1d(aggr)
    analysis.write_rows(
        out / "aggression.csv",
        [{"agent": a, "aggression": v, "cluster": "aggressive" if a in clusters.high else "defensive", "island": shadow.island_of[a]} for a, v in sorted(aggr.items())],
    )
    groups = {"aggressive": clusters.high, "defensive": clusters.low}
    groups.update({f"island{i}": members for i, members in enumerate(shadow.islands)})
    analysis.write_rows(out / "cosine.csv", analysis.cosine_table(selector.model.agent_embeddings(), groups))
    analysis.write_rows(out / "fitness.csv", fitness_rows(out / "epochs.jsonl"))

    summary = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "expected_elo": {name: e.as_dict() for name, e in expected.items()},
        "berteam_beats_mcaa": expected["berteam"].rating > expected["mcaa"].rating,
        "correlation": corr,
        "mcaa_factorization_max_error": mcaa_check,
        "aggression_clusters": {"threshold": clusters.threshold, "aggressive": clusters.high, "defensive": clusters.low, "silhouette": clusters.silhouette},
        "final_mean_fitness": float(np.mean([m.fitness for m in pop])),
        "buffer_size": len(selector.buffer),
        "top_teams": [team_key(t) for t in analysis.top_teams(occurrence, 5)],
    }
    write_json(out / "summary.json", summary)
    write_json(out / "timings.json", {"train_seconds": t_train, "seconds_per_epoch": t_train / max(1, cfg.coev.n_epochs), "total_seconds": time.perf_counter() - t0})
    return summary


def _mcaa_factorization_error(sel: MCAASelector, k: int) -> float:
    """Largest deviation of the enumerated MCAA team distribution from a proper, slot-factorized law.

    Checks that ordered-team probabilities sum to 1 and that each slot's
    marginal island mass equals that slot's mainland probability (on
    nonempty islands, renormalized).
    """
    islands = sel.islands
    n = len(sel.island_of)
    probs = {t: mcaa_team_probability(sel.dist, islands, t, sel.temperature) for t in itertools.product(range(n), repeat=k)}
    err = abs(sum(probs.values()) - 1.0)
    live = np.array([len(m) > 0 for m in islands])
    for slot in range(k):
        target = sel.dist.slot_probs[slot] * live
        target = target / target.sum()
        mass = np.zeros(len(islands))
        for t, p in probs.items():
            mass[sel.island_of[t[slot]]] += p
        err = max(err, float(np.abs(mass - target).max()))
    return err


GRID_UPDATES = ("coev", "map-elites")
GRID_SELECTORS = ("berteam", "mcaa")


def run_comparison(cfg: ExperimentConfig, resume: bool = False, log: Callable[[str], None] | None = None) -> dict:
    """The four-way grid: {coevolution, MAP-Elites} population updates x {BERTeam, MCAA} selectors."""
    out = _start(cfg)
    t0 = time.perf_counter()
    game = build_game(cfg)
    if isinstance(game, MatrixTeamGame):
        raise ContractError("the comparison experiment needs a learning game (game.kind: gridctf)")
    k, n, cc = cfg.coev.team_size, cfg.n_agents, cfg.comparison
    s_model, s_run, s_eval, *agent_seeds = seeds_for(cfg.seed, 3 + n)
    eval_rng = np.random.default_rng(s_eval)
    refs = _reference_set(cfg, game, eval_rng)
    plan = MatchPlan.draw(len(refs.teams), cfg.evaluation.expected_elo_games, eval_rng)
    analysis.write_rows(out / "reference_elo.csv", refs.rows(cfg.coev.elo))
    rows, timings = [], {}
    for update_kind, sel_kind in cc.grid:
        if update_kind not in GRID_UPDATES or sel_kind not in GRID_SELECTORS:
            raise ContractError(f"unknown grid cell {update_kind}/{sel_kind}")
        tag = f"{update_kind}_{sel_kind}"
        cell_json = out / f"cell_{tag}.json"
        if resume and cell_json.exists():
            rows.append(json.loads(cell_json.read_text()))
            continue
        if log:
            log(f"cell {tag}")
        t_cell = time.perf_counter()
        island_of = contiguous_islands(n, cc.n_islands)
        pop = build_population(cfg, game, agent_seeds, island_of)
        if sel_kind == "berteam":
            selector = build_berteam(cfg, n, s_model)
        else:
            selector = MCAASelector(island_of, k, cc.ema_alpha, cc.mcaa_temperature)
        run = PopulationRun(cfg, game, pop, selector, rng=np.random.default_rng(s_run))
        if update_kind == "map-elites":
            opponents = [scripted_team([kind] * k, cfg.game.scripted_epsilon) for kind in FIXED_POLICY_KINDS]

            def behavior(m, run=run, opponents=opponents):
                # drawn from the run's own generator so a resumed run replays exactly
                return evaluate_agent_aggression(LearnerPolicy(m.policy), opponents, game, cfg.evaluation.aggression_reps, run.rng, k)

            run.population_update = MapElitesUpdate(
                list(island_of), behavior, MapElitesConfig(cc.me_lambda, cc.me_max_unique_fraction), cc.elites_per_island
            )
        train_population(run, out, tag=tag, resume=resume, on_epoch=_progress(log, cfg))
        t_train = time.perf_counter() - t_cell
        est = selector_expected_elo(selector, refs.ratings, cfg.evaluation.expected_elo_games, _vs_reference(run, refs), k, run.rng, cfg.coev.elo, plan=plan)
        row = {"population_update": update_kind, "selector": sel_kind, **est.as_dict()}
        write_json(cell_json, row)
        rows.append(row)
        timings[tag] = {"train_seconds": t_train, "seconds_per_epoch": t_train / max(1, cfg.coev.n_epochs)}
    analysis.write_rows(out / "comparison.csv", rows)
    summary = {"kind": cfg.kind, "seed": cfg.seed, "cells": rows}
    write_json(out / "summary.json", summary)
    timings["total_seconds"] = time.perf_counter() - t0
    write_json(out / "timings.json", timings)
    return summary


NASH_FIXTURES = ("rock-paper-scissors", "matching-pennies", "seven-policy")


def nash_fixture(name: str) -> CoachGame:
    if name == "rock-paper-scissors":
        return rock_paper_scissors()
    if name == "matching-pennies":
        return matching_pennies()
    if name == "seven-policy":
        return CoachGame.from_matrix_game(seven_policy_fixture())
    raise ContractError(f"unknown fixture {name!r}; choose from {NASH_FIXTURES}")


def run_nash(cfg: ExperimentConfig, resume: bool = False, log: Callable[[str], None] | None = None) -> dict:
    out = _start(cfg)
    t0 = time.perf_counter()
    nc = cfg.nash
    game = nash_fixture(nc.fixture)
    if nc.init == "pure-first":
        init = [np.eye(len(t))[0] for t in game.team_sets]
    elif nc.init == "best-response-uniform":
        init = None
    else:
        raise ContractError(f"unknown init {nc.init!r}")
    res = fictitious_play(game, nc.n_iters, nc.record_every, init)
    res.write_csv(out / "exploitability.csv", game)
    final = res.history[-1][2]
    summary = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "fixture": nc.fixture,
        "n_iters": nc.n_iters,
        "final_exploitability": final,
        "mixtures": [[float(x) for x in m] for m in res.mixtures],
    }
    write_json(out / "summary.json", summary)
    write_json(out / "timings.json", {"total_seconds": time.perf_counter() - t0})
    return summary


RUNNERS = {
    "fixed-policy": run_fixed_policy,
    "coevolution": run_coevolution,
    "comparison": run_comparison,
    "nash": run_nash,
}


def run_experiment(cfg: ExperimentConfig, resume: bool = False, log: Callable[[str], None] | None = None) -> dict:
    return RUNNERS[cfg.kind](cfg, resume=resume, log=log)


def run_tournament(cfg: ExperimentConfig) -> dict:
    """Scripted-team round robin on GridCTF, written as an Elo table."""
    out = _start(cfg)
    game = build_game(cfg)
    if isinstance(game, MatrixTeamGame):
        raise ContractError("the tournament runs on GridCTF (game.kind: gridctf)")
    refs = _reference_set(cfg, game, np.random.default_rng(seeds_for(cfg.seed, 1)[0]))
    rows = sorted(refs.rows(cfg.coev.elo), key=lambda r: (-r["natural_rating"], r["team"]))
    analysis.write_rows(out / "reference_elo.csv", rows)
    summary = {"kind": "tournament", "seed": cfg.seed, "best_team": rows[0]["team"], "n_teams": len(rows)}
    write_json(out / "summary.json", summary)
    return summary

