"""Grid capture-the-flag for two teams.

Rules
-----
* 16x10 grid split into two halves; team 0 owns x < W/2, team 1 the rest.
* Actions: N, S, E, W, STAY.  All agents move simultaneously; cells may be shared.
* Tag: an agent standing on its own half, off cooldown, tags an adjacent
  (Manhattan distance <= 1) opponent on that half.  The intruder teleports to
  its spawn and drops any flag it carries; the tagger cools down for
  ``TAG_COOLDOWN`` steps.
* Grab: entering the opponent's flag cell while the flag is at its base.
* Capture: carrying the flag back onto the own half.  This ends the game
  with outcome 1 for the capturing team; timeout gives every team 1/m.
* Fast agents (``speed`` 2) act twice per step; rules are resolved after
  every sub-move.
* Optional potential-based shaping (``shaping`` > 0) adds
  shaping * (phi(s') - phi(s)) to each agent's step reward, where phi is minus
  the normalized distance to the agent's current objective (the enemy flag,
  or home once carrying it).  It is off by default.

Policies see the world in a canonical frame in which their own flag is on
the left (team 1's view is mirrored in x), so the same policy plays either
side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..model import ContractError
from .base import EventCounts, GameResult, Trajectory

N, S, E, W, STAY = range(5)
N_ACTIONS = 5
ACTION_NAMES = ("N", "S", "E", "W", "STAY")
MOVES = ((0, 1), (0, -1), (1, 0), (-1, 0), (0, 0))
MIRROR_ACTION = (N, S, W, E, STAY)

TAG_COOLDOWN = 5
REWARD_GRAB = 0.5
REWARD_CAPTURE = 1.0
REWARD_TAG = 0.25
REWARD_TAGGED = -0.25
REWARD_STEP = -0.001
N_FEATURES = 12


class Policy(Protocol):
    speed: int
    needs_features: bool

    def act(self, state: "GridCTFState", team: int, slot: int, features, rng: np.random.Generator) -> int: ...


@dataclass
class GridCTFState:
    width: int
    height: int
    pos: list[list[list[int]]]  # [team][slot] -> [x, y] (world frame)
    has_flag: list[list[bool]]
    cooldown: list[list[int]]
    carrier: list[tuple[int, int] | None]  # per flag owner: (team, slot) carrying it
    step: int
    max_steps: int

    @property
    def half(self) -> int:
        return self.width // 2

    def canon_x(self, team: int, x: int) -> int:
        return x if team == 0 else self.width - 1 - x

    def canon_pos(self, team: int, t: int, s: int) -> tuple[int, int]:
        x, y = self.pos[t][s]
        return self.canon_x(team, x), y

    def on_own_half(self, team: int, x: int) -> bool:
        return (x < self.half) if team == 0 else (x >= self.half)

    def flag_base(self, team: int) -> tuple[int, int]:
        x = 1 if team == 0 else self.width - 2
        return x, self.height // 2


def spawn_points(width: int, height: int, team: int, k: int) -> list[tuple[int, int]]:
    x = 2 if team == 0 else width - 3
    return [(x, int(round((s + 1) * height / (k + 1))) % height) for s in range(k)]


def manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def objective_potential(state: GridCTFState, team: int, slot: int) -> float:
    me = state.canon_pos(team, team, slot)
    if state.has_flag[team][slot]:
        target = (state.half - 1, me[1])
    else:
        ex, ey = state.flag_base(1 - team)
        target = (state.canon_x(team, ex), ey)
    return -manhattan(me, target) / (state.width + state.height)


def observe(state: GridCTFState, team: int, slot: int) -> np.ndarray:
    """12 egocentric features in the agent's canonical frame.

    Offsets (dx, dy) scaled by the grid size to: own flag, enemy flag (its
    carrier when carried), nearest teammate, two nearest opponents; then the
    has-flag bit and the on-own-half bit.  Missing entities give zeros.
    """
    W_, H_ = state.width, state.height
    me = state.canon_pos(team, team, slot)
    feats = np.zeros(N_FEATURES)

    def put(i, target):
        feats[i] = (target[0] - me[0]) / W_
        feats[i + 1] = (target[1] - me[1]) / H_

    ox, oy = state.flag_base(0)
    put(0, (ox, oy))
    enemy = 1 - team
    car = state.carrier[enemy]
    if car is None:
        ex, ey = state.flag_base(enemy)
        put(2, (state.canon_x(team, ex), ey))
    else:
        put(2, state.canon_pos(team, *car))
    mates = [state.canon_pos(team, team, s) for s in range(len(state.pos[team])) if s != slot]
    if mates:
        put(4, min(mates, key=lambda p: (manhattan(p, me), p)))
    opps = sorted((state.canon_pos(team, enemy, s) for s in range(len(state.pos[enemy]))), key=lambda p: (manhattan(p, me), p))
    for j, p in enumerate(opps[:2]):
        put(6 + 2 * j, p)
    feats[10] = 1.0 if state.has_flag[team][slot] else 0.0
    feats[11] = 1.0 if me[0] < state.half else 0.0
    return feats


class GridCTF:
    n_teams = 2

    def __init__(self, width: int = 16, height: int = 10, max_steps: int = 200, team_size: int = 2, shaping: float = 0.0):
        if width % 2 or width < 6:
            raise ContractError("width must be even and >= 6")
        if height < 3 or max_steps < 1:
            raise ContractError("height must be >= 3 and max_steps >= 1")
        self.width = width
        self.height = height
        self.max_steps = max_steps
        self.team_size = team_size
        self.shaping = shaping

    def reset(self, sizes: Sequence[int]) -> GridCTFState:
        pos = [[list(p) for p in spawn_points(self.width, self.height, t, k)] for t, k in enumerate(sizes)]
        return GridCTFState(
            self.width,
            self.height,
            pos,
            [[False] * k for k in sizes],
            [[0] * k for k in sizes],
            [None, None],
            0,
            self.max_steps,
        )

    def play(self, teams: Sequence[Sequence[Policy]], rng: np.random.Generator, record: bool = False) -> GameResult:
        if len(teams) != 2 or any(len(t) == 0 for t in teams):
            raise ContractError("GridCTF needs two nonempty teams of policies")
        sizes = [len(t) for t in teams]
        st = self.reset(sizes)
        agents = [(t, s) for t in range(2) for s in range(sizes[t])]
        events = {a: EventCounts() for a in agents}
        totals = {a: 0.0 for a in agents}
        trajs = {a: Trajectory() for a in agents if getattr(teams[a[0]][a[1]], "needs_features", False)}
        spawns = [spawn_points(self.width, self.height, t, sizes[t]) for t in range(2)]
        max_speed = max(getattr(teams[t][s], "speed", 1) for t, s in agents)
        replay: list[dict] | None = [] if record else None
        winners: list[int] = []

        while st.step < self.max_steps and not winners:
            rewards = {a: REWARD_STEP for a in agents}
            if self.shaping:
                phi = {a: objective_potential(st, *a) for a in agents}
            step_actions: dict = {}
            for sub in range(max_speed):
                acts = {}
                for t, s in agents:
                    pol = teams[t][s]
                    if getattr(pol, "speed", 1) <= sub:
                        continue
                    feats = observe(st, t, s) if getattr(pol, "needs_features", False) else None
                    a = int(pol.act(st, t, s, feats, rng))
                    if not 0 <= a < N_ACTIONS:
                        raise ContractError(f"policy returned invalid action {a}")
                    acts[t, s] = a
                    if sub == 0 and (t, s) in trajs:
                        trajs[t, s].observations.append(feats)
                        trajs[t, s].actions.append(a)
                for (t, s), a in acts.items():
                    world = a if t == 0 else MIRROR_ACTION[a]
                    dx, dy = MOVES[world]
                    p = st.pos[t][s]
                    p[0] = min(max(p[0] + dx, 0), self.width - 1)
                    p[1] = min(max(p[1] + dy, 0), self.height - 1)
                    if replay is not None:
                        step_actions.setdefault(f"{t}.{s}", []).append(ACTION_NAMES[a])
                winners = self._resolve(st, agents, events, rewards, spawns)
                if winners:
                    break
            if self.shaping:
                for a in agents:
                    rewards[a] += self.shaping * (objective_potential(st, *a) - phi[a])
            st.step += 1
            for t, s in agents:
                if st.cooldown[t][s] > 0:
                    st.cooldown[t][s] -= 1
            for a in agents:
                totals[a] += rewards[a]
                if a in trajs:
                    trajs[a].rewards.append(rewards[a])
            if replay is not None:
                replay.append(
                    {
                        "step": st.step,
                        "positions": {f"{t}.{s}": list(st.pos[t][s]) for t, s in agents},
                        "actions": step_actions,
                        "has_flag": {f"{t}.{s}": st.has_flag[t][s] for t, s in agents},
                        "events": {f"{t}.{s}": events[t, s].as_dict() for t, s in agents},
                    }
                )
        if winners:
            outcome = np.zeros(2)
            outcome[winners] = 1.0 / len(winners)
        else:
            outcome = np.full(2, 0.5)
        return GameResult(outcome, trajs, events, totals, st.step, replay)

    def _resolve(self, st: GridCTFState, agents, events, rewards, spawns) -> list[int]:
        # tags
        for t, s in agents:
            if st.cooldown[t][s] > 0 or not st.on_own_half(t, st.pos[t][s][0]):
                continue
            me = st.pos[t][s]
            enemy = 1 - t
            best = None
            for s2 in range(len(st.pos[enemy])):
                p = st.pos[enemy][s2]
                if st.on_own_half(t, p[0]) and manhattan(p, me) <= 1:
                    key = (manhattan(p, me), s2)
                    if best is None or key < best[0]:
                        best = (key, s2)
            if best is None:
                continue
            s2 = best[1]
            events[t, s].tags += 1
            events[enemy, s2].got_tagged += 1
            rewards[t, s] += REWARD_TAG
            rewards[enemy, s2] += REWARD_TAGGED
            st.cooldown[t][s] = TAG_COOLDOWN
            st.pos[enemy][s2] = list(spawns[enemy][s2])
            if st.has_flag[enemy][s2]:
                st.has_flag[enemy][s2] = False
                st.carrier[t] = None
        # grabs
        for t, s in agents:
            enemy = 1 - t
            if st.has_flag[t][s] or st.carrier[enemy] is not None:
                continue
            if tuple(st.pos[t][s]) == st.flag_base(enemy):
                st.has_flag[t][s] = True
                st.carrier[enemy] = (t, s)
                events[t, s].grabs += 1
                rewards[t, s] += REWARD_GRAB
        # captures
        winners = []
        for t, s in agents:
            if st.has_flag[t][s] and st.on_own_half(t, st.pos[t][s][0]):
                events[t, s].captures += 1
                rewards[t, s] += REWARD_CAPTURE
                if t not in winners:
                    winners.append(t)
        return winners


def write_replay(path, replay: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in replay:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
