"""Behavior projection: how aggressively an agent plays on its own."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .base import EventCounts, aggression_metric
from .gridctf import GridCTF


def evaluate_agent_aggression(
    agent,
    opponent_teams: Sequence[Sequence],
    game: GridCTF,
    n_reps: int,
    rng: np.random.Generator,
    team_size: int | None = None,
) -> float:
    """Mean aggression metric of a team made of copies of ``agent``.

    Each copy's events are scored separately and averaged; the mean is then
    taken over every opponent team and ``n_reps`` repetitions.
    """
    k = team_size or game.team_size
    scores = []
    for opp in opponent_teams:
        for _ in range(n_reps):
            res = game.play([[agent] * k, list(opp)], rng)
            for s in range(k):
                scores.append(aggression_metric(res.events.get((0, s), EventCounts())))
    if not scores:
        raise ValueError("no opponent teams given")
    return float(np.mean(scores))
