"""Two-team game whose outcome is a Bernoulli draw from a known win table.

Members are just agent ids; order inside a team does not matter.  This is
the exactly solvable surrogate used by the oracle checks.
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from ..model import ContractError
from .base import GameResult


def canon(team: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted(int(t) for t in team))


class MatrixTeamGame:
    n_teams = 2

    def __init__(self, win_prob: dict[tuple[tuple[int, ...], tuple[int, ...]], float], team_size: int):
        self.team_size = team_size
        self.win_prob: dict = {}
        for (a, b), p in win_prob.items():
            a, b = canon(a), canon(b)
            if not 0.0 <= p <= 1.0:
                raise ContractError(f"win probability {p} for {a} vs {b} outside [0, 1]")
            self.win_prob[a, b] = float(p)
        for (a, b), p in self.win_prob.items():
            q = self.win_prob.get((b, a))
            if q is None or abs(p + q - 1.0) > 1e-12:
                raise ContractError(f"win_prob({a},{b}) + win_prob({b},{a}) != 1")

    @classmethod
    def from_function(cls, n_agents: int, team_size: int, fn: Callable[[tuple, tuple], float]) -> "MatrixTeamGame":
        teams = list(combinations_with_replacement(range(n_agents), team_size))
        return cls({(a, b): fn(a, b) for a in teams for b in teams}, team_size)

    @property
    def teams(self) -> list[tuple[int, ...]]:
        return sorted({a for a, _ in self.win_prob})

    def p(self, a, b) -> float:
        return self.win_prob[canon(a), canon(b)]

    def expected_outcome_matrix(self) -> tuple[list[tuple[int, ...]], np.ndarray]:
        teams = self.teams
        m = np.array([[self.win_prob[a, b] for b in teams] for a in teams])
        return teams, m

    def play(self, teams, rng: np.random.Generator) -> GameResult:
        if len(teams) != 2 or any(len(t) != self.team_size for t in teams):
            raise ContractError(f"expected two teams of size {self.team_size}, got {teams}")
        p = self.p(teams[0], teams[1])
        first = rng.random() < p
        return GameResult(np.array([1.0, 0.0]) if first else np.array([0.0, 1.0]))


# Roles and strengths of the seven fixed policies in the fixture.  Indices
# follow the scripted GridCTF kinds in ``FIXED_POLICY_KINDS``.
FIXTURE_STRENGTH = np.array([0.0, 0.3, 0.6, 1.3, 0.2, 0.5, 0.8])
FIXTURE_ATTACKERS = frozenset({1, 2, 3})
FIXTURE_DEFENDERS = frozenset({4, 5, 6})
FIXTURE_SYNERGY = 0.6
FIXTURE_SCALE = 1.5


def fixture_team_strength(team: Sequence[int]) -> float:
    s = float(FIXTURE_STRENGTH[list(team)].sum())
    roles = {("a" if t in FIXTURE_ATTACKERS else "d" if t in FIXTURE_DEFENDERS else "r") for t in team}
    if {"a", "d"} <= roles:
        s += FIXTURE_SYNERGY
    return s


def seven_policy_fixture(team_size: int = 2, scale: float = FIXTURE_SCALE) -> MatrixTeamGame:
    """Seven fixed-policy strengths with a bonus for mixed attack/defend teams.

    Win probability is logistic in the strength gap, so the balanced
    (hard attacker, hard defender) team is best against every opponent.
    """

    def fn(a, b):
        return 1.0 / (1.0 + np.exp(-scale * (fixture_team_strength(a) - fixture_team_strength(b))))

    return MatrixTeamGame.from_function(len(FIXTURE_STRENGTH), team_size, fn)
