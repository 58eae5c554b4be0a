"""Exact team-selection game between coaches, solved by fictitious play.

Each coach picks a team from an explicit list; U[i] is coach i's expected
outcome for every joint choice.  Training a selector on an outcome-weighted
dataset amounts to best-responding to the opponents' average strategy, so
repeating it is fictitious play.  Everything here is enumerated exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .model import ContractError


@dataclass
class CoachGame:
    """``payoffs[i]`` has one axis per coach; entries are coach i's expected outcome."""

    team_sets: list[list[Hashable]]
    payoffs: np.ndarray  # (m, |T_1|, ..., |T_m|)

    def __post_init__(self):
        self.payoffs = np.asarray(self.payoffs, dtype=np.float64)
        m = len(self.team_sets)
        shape = (m, *(len(t) for t in self.team_sets))
        if self.payoffs.shape != shape:
            raise ContractError(f"payoffs must have shape {shape}, got {self.payoffs.shape}")
        if np.any(self.payoffs < 0) or np.any(self.payoffs > 1):
            raise ContractError("expected outcomes must lie in [0, 1]")
        if np.any(np.abs(self.payoffs.sum(axis=0) - 1.0) > 1e-9):
            raise ContractError("expected outcomes must sum to 1 over coaches for every joint choice")

    @property
    def n_coaches(self) -> int:
        return len(self.team_sets)

    @classmethod
    def two_coach(cls, teams_a, teams_b, win_a) -> "CoachGame":
        w = np.asarray(win_a, dtype=np.float64)
        return cls([list(teams_a), list(teams_b)], np.stack([w, 1.0 - w]))

    @classmethod
    def from_matrix_game(cls, game) -> "CoachGame":
        """Both coaches choose among all unordered teams of a MatrixTeamGame."""
        teams, m = game.expected_outcome_matrix()
        return cls.two_coach(teams, teams, m)


def check_simplex(p, n: int | None = None, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or (n is not None and p.size != n):
        raise ContractError(f"expected a distribution over {n} teams, got shape {p.shape}")
    if np.any(p < -tol) or abs(p.sum() - 1.0) > max(tol, 1e-12 * p.size):
        raise ContractError("not a distribution: entries must be >= 0 and sum to 1")
    return p


def l1_loss(p, team_index: int) -> float:
    """||p - e_T||_1, which equals 2 - 2 p_T."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= team_index < p.size:
        raise ContractError(f"team index {team_index} not in the support set of size {p.size}")
    e = np.zeros_like(p)
    e[team_index] = 1.0
    return float(np.abs(p - e).sum())


def outcome_weights(game: CoachGame, i: int, mixtures: Sequence[np.ndarray]) -> np.ndarray:
    """W(A) = E_{B ~ q_-i}[U_i(A, B)], exactly, for every team A of coach i."""
    u = game.payoffs[i]
    # Contract every other coach's axis with its mixture, last axis first so
    # earlier axis numbers stay valid.
    for j in reversed(range(game.n_coaches)):
        if j == i:
            continue
        u = np.tensordot(u, np.asarray(mixtures[j], dtype=np.float64), axes=([j], [0]))
    return u


def best_response(weights, atol: float = 1e-12) -> np.ndarray:
    """Uniform over the maximum-weight teams."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ContractError("weights must be nonempty")
    top = w >= w.max() - atol
    return top / top.sum()


def expected_payoffs(game: CoachGame, mixtures: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros(game.n_coaches)
    for i in range(game.n_coaches):
        out[i] = float(outcome_weights(game, i, mixtures) @ mixtures[i])
    return out


def exploitability(game: CoachGame, mixtures: Sequence[np.ndarray]) -> float:
    """Sum over coaches of the gain from a unilateral best response."""
    total = 0.0
    for i in range(game.n_coaches):
        p = check_simplex(mixtures[i], len(game.team_sets[i]), tol=1e-9)
        w = outcome_weights(game, i, mixtures)
        total += float(w.max() - w @ p)
    return max(total, 0.0)


@dataclass
class FictitiousPlayResult:
    mixtures: list[np.ndarray]
    history: list[tuple[int, list[np.ndarray], float]] = field(default_factory=list)

    def write_csv(self, path, game: CoachGame) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["iteration"]
            for i, teams in enumerate(game.team_sets):
                header += [f"coach{i}:{t}" for t in teams]
            w.writerow(header + ["exploitability"])
            for it, mix, ex in self.history:
                w.writerow([it, *[repr(float(x)) for m in mix for x in m], repr(ex)])


def fictitious_play(game: CoachGame, n_iters: int, record_every: int = 1, init: Sequence[np.ndarray] | None = None) -> FictitiousPlayResult:
    """Simultaneous fictitious play from best responses to uniform opponents.

    The average after t iterations is the mean of the first t best
    responses.  ``record_every`` controls how often (iteration, mixtures,
    exploitability) is appended to the history; the last iteration is always
    recorded.
    """
    if n_iters < 1:
        raise ContractError("n_iters must be >= 1")
    m = game.n_coaches
    if init is None:
        uniform = [np.full(len(t), 1.0 / len(t)) for t in game.team_sets]
        avg = [best_response(outcome_weights(game, i, uniform)) for i in range(m)]
    else:
        avg = [check_simplex(p, len(t), tol=1e-9).copy() for p, t in zip(init, game.team_sets)]
    result = FictitiousPlayResult(avg)
    for t in range(1, n_iters + 1):
        if t > 1:
            br = [best_response(outcome_weights(game, i, avg)) for i in range(m)]
            avg = [a + (b - a) / t for a, b in zip(avg, br)]
        if t % record_every == 0 or t == n_iters:
            result.history.append((t, [a.copy() for a in avg], exploitability(game, avg)))
    result.mixtures = avg
    return result


def matching_pennies() -> CoachGame:
    """Two teams per coach; coach 0 wins when the choices match."""
    return CoachGame.two_coach(["heads", "tails"], ["heads", "tails"], np.eye(2))


def rock_paper_scissors() -> CoachGame:
    """Three teams, each beating one other; symmetric, zero-sum, unique uniform equilibrium."""
    w = np.array([[0.5, 0.0, 1.0], [1.0, 0.5, 0.0], [0.0, 1.0, 0.5]])
    teams = ["rock", "paper", "scissors"]
    return CoachGame.two_coach(teams, teams, w)


def grid_best_response(weights, resolution: float = 0.01) -> np.ndarray:
    """argmax_p sum_T W(T) p_T over a simplex grid (oracle for ``best_response``).

    Among grid points attaining the maximum (to 1e-12) the returned point
    is their mean, which is the uniform split for tied teams.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    steps = int(round(1.0 / resolution))
    axes = np.meshgrid(*[np.arange(steps + 1)] * (n - 1), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=1) if n > 1 else np.zeros((1, 0), int)
    head = head[head.sum(axis=1) <= steps]
    grid = np.concatenate([head, steps - head.sum(axis=1, keepdims=True)], axis=1) / steps
    vals = grid @ w
    top = grid[vals >= vals.max() - 1e-12]
    return top.mean(axis=0)
