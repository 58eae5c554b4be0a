"""Elo ratings in natural-log units.

Internally a rating gap of ``d`` means the stronger side wins with
probability ``1/(1+exp(-d))``.  The chess factor 400/ln 10 is applied only
when ratings are displayed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

CHESS_SCALE = 400.0 / math.log(10.0)


class EloError(ValueError):
    pass


@dataclass
class EloConfig:
    update_scale_c: float = 0.1
    display_scale: float = CHESS_SCALE
    anchor_mean: float = 1000.0
    anneal_tau: float | None = None

    def __post_init__(self):
        if not self.update_scale_c > 0:
            raise EloError("update_scale_c must be > 0")

    def scale_at(self, t: float) -> float:
        """c_t = c_0 / (1 + t/tau); constant when ``anneal_tau`` is unset."""
        if self.anneal_tau is None:
            return self.update_scale_c
        return self.update_scale_c / (1.0 + t / self.anneal_tau)


@dataclass
class EloTable:
    ratings: dict[Hashable, float] = field(default_factory=dict)
    games: dict[Hashable, int] = field(default_factory=dict)

    def add(self, key, rating: float = 0.0) -> None:
        self.ratings[key] = float(rating)
        self.games.setdefault(key, 0)

    def __getitem__(self, key) -> float:
        return self.ratings[key]

    def __contains__(self, key) -> bool:
        return key in self.ratings

    def display(self, cfg: EloConfig) -> dict:
        return anchor_mean(self.ratings, cfg)

    def to_csv(self, path, cfg: EloConfig) -> None:
        shown = self.display(cfg)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "natural_rating", "display_rating", "games_played"])
            for key in self.ratings:
                w.writerow([key, repr(self.ratings[key]), repr(shown[key]), self.games.get(key, 0)])


def expected_outcome(f1: float, f2: float) -> float:
    return 1.0 / (1.0 + math.exp(f2 - f1))


def update_pair(f1: float, f2: float, s1: float, c: float) -> tuple[float, float]:
    if not 0.0 <= s1 <= 1.0:
        raise EloError(f"outcome must lie in [0, 1], got {s1}")
    delta = c * (s1 - expected_outcome(f1, f2))
    return f1 + delta, f2 - delta


def update_captain_fitness(table: EloTable, captain, opponent_captain, outcome: float, cfg: EloConfig, t: float = 0.0) -> None:
    """Elo update on the two captains only; other team members are left alone."""
    for key in (captain, opponent_captain):
        if key not in table:
            raise EloError(f"unknown captain {key!r}")
    if captain == opponent_captain:
        table.games[captain] += 2
        return
    a, b = update_pair(table[captain], table[opponent_captain], outcome, cfg.scale_at(t))
    table.ratings[captain] = a
    table.ratings[opponent_captain] = b
    table.games[captain] += 1
    table.games[opponent_captain] += 1


def anchor_mean(ratings: dict, cfg: EloConfig) -> dict:
    """Display ratings: natural ratings scaled by display_scale, shifted to mean anchor_mean."""
    if not ratings:
        raise EloError("nothing to anchor")
    scaled = {k: v * cfg.display_scale for k, v in ratings.items()}
    shift = cfg.anchor_mean - float(np.mean(list(scaled.values())))
    return {k: v + shift for k, v in scaled.items()}


def recenter(values: np.ndarray, mean: float = 0.0) -> np.ndarray:
    return values - values.mean() + mean


def fit_bradley_terry(wins: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000, prior: float = 0.0) -> np.ndarray:
    """Maximum-likelihood natural-unit ratings from a pairwise win matrix.

    ``wins[i, j]`` is the (possibly fractional) number of wins of i over j; a
    draw adds 0.5 to both sides.  Uses Hunter's MM iteration until the
    largest relative change of the strengths falls below ``tol``, then centers
    at zero.  ``prior`` adds that many virtual draws to every compared pair,
    which keeps the MLE finite when a team wins or loses everything.
    """
    wins = np.asarray(wins, dtype=np.float64)
    n = wins.shape[0]
    if wins.shape != (n, n):
        raise EloError(f"wins must be square, got {wins.shape}")
    games = wins + wins.T
    np.fill_diagonal(games, 0.0)
    ncomp, labels = connected_components(csr_matrix(games > 0), directed=False)
    if ncomp > 1:
        groups = [sorted(np.flatnonzero(labels == c).tolist()) for c in range(ncomp)]
        raise EloError(f"comparison graph is disconnected; components: {groups}")
    w = wins.copy()
    np.fill_diagonal(w, 0.0)
    if prior:
        compared = games > 0
        w = w + 0.5 * prior * compared
        games = games + prior * compared
    total_wins = w.sum(axis=1)
    p = np.ones(n)
    for _ in range(max_iter):
        denom = (games / (p[:, None] + p[None, :])).sum(axis=1)
        new = total_wins / denom
        new /= np.exp(np.mean(np.log(new)))
        change = np.max(np.abs(new - p) / p)
        p = new
        if change < tol:
            break
    return recenter(np.log(p))


def wins_from_outcomes(n: int, results: Iterable[tuple[int, int, float]]) -> np.ndarray:
    """Accumulate (i, j, outcome_of_i) records into a win matrix."""
    wins = np.zeros((n, n))
    for i, j, s in results:
        wins[i, j] += s
        wins[j, i] += 1.0 - s
    return wins


@dataclass
class FixedReferenceFit:
    rating: float
    stderr: float
    n_games: int


def fit_against_references(opponent_ratings, outcomes, prior_games: float = 0.0, prior_rating: float | None = None) -> FixedReferenceFit:
    """One-parameter MLE of a rating from games against fixed-rating opponents.

    The references are not updated.  ``stderr`` is the sandwich estimate
    sqrt(sum (S - Y)^2) / sum Y(1 - Y), which stays honest when the opponent
    is itself random per game.  ``prior_games`` virtual draws against
    ``prior_rating`` (default: mean opponent rating) keep the fit finite.
    """
    r = np.asarray(opponent_ratings, dtype=np.float64)
    s = np.asarray(outcomes, dtype=np.float64)
    if r.shape != s.shape or r.size == 0:
        raise EloError("need matching, nonempty rating and outcome arrays")
    pr = float(r.mean()) if prior_rating is None else prior_rating

    def score(f):
        y = 1.0 / (1.0 + np.exp(r - f))
        extra = prior_games * (0.5 - 1.0 / (1.0 + math.exp(pr - f)))
        return float(np.sum(s - y)) + extra

    lo, hi = r.min() - 50.0, r.max() + 50.0
    if score(lo) <= 0:
        f = lo
    elif score(hi) >= 0:
        f = hi
    else:
        f = brentq(score, lo, hi, xtol=1e-12)
    y = 1.0 / (1.0 + np.exp(r - f))
    info = float(np.sum(y * (1.0 - y)))
    stderr = math.sqrt(float(np.sum((s - y) ** 2))) / info if info > 0 else math.inf
    return FixedReferenceFit(float(f), stderr, int(r.size))
