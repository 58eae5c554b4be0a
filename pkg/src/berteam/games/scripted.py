"""Fixed GridCTF policies: random, and easy/medium/hard attackers and defenders.

Easy policies follow a fixed path, medium ones are greedy potential-field
controllers, hard ones are the medium controllers moving twice per step.
All reasoning happens in the acting team's canonical frame.
"""

from __future__ import annotations

import numpy as np

from ..model import ContractError
from .gridctf import E, MOVES, N, N_ACTIONS, S, STAY, W, GridCTFState, manhattan

FIXED_POLICY_KINDS = (
    "random",
    "attack-easy",
    "attack-med",
    "attack-hard",
    "defend-easy",
    "defend-med",
    "defend-hard",
)

ATTACK_LANE_Y = 2
PATROL_X = 5


def _step_toward(me, target, allowed=None) -> int:
    """Greedy move reducing Manhattan distance, x-axis first."""
    best, best_key = STAY, (manhattan(me, target), 1)
    for a in (E, W, N, S):
        dx, dy = MOVES[a]
        nxt = (me[0] + dx, me[1] + dy)
        if allowed is not None and not allowed(nxt):
            continue
        key = (manhattan(nxt, target), 0)
        if key < best_key:
            best, best_key = a, key
    return best


class ScriptedPolicy:
    needs_features = False

    def __init__(self, kind: str, epsilon: float = 0.0):
        if kind not in FIXED_POLICY_KINDS:
            raise ContractError(f"unknown scripted policy {kind!r}; choose from {FIXED_POLICY_KINDS}")
        if not 0.0 <= epsilon <= 1.0:
            raise ContractError("epsilon must lie in [0, 1]")
        self.kind = kind
        self.epsilon = epsilon
        self.speed = 2 if kind.endswith("-hard") else 1

    def __repr__(self) -> str:
        return f"ScriptedPolicy({self.kind!r}, epsilon={self.epsilon})"

    def act(self, st: GridCTFState, team: int, slot: int, features, rng: np.random.Generator) -> int:
        # Optional action noise breaks the deterministic cycles that otherwise
        # make some pairings always end the same way.
        if self.epsilon and rng.random() < self.epsilon:
            return int(rng.integers(N_ACTIONS))
        if self.kind == "random":
            return int(rng.integers(N_ACTIONS))
        if self.kind == "attack-easy":
            return self._attack_easy(st, team, slot)
        if self.kind == "defend-easy":
            return self._defend_easy(st, team, slot)
        if self.kind.startswith("attack"):
            return self._attack_field(st, team, slot)
        return self._defend_greedy(st, team, slot)

    # -- easy: fixed paths ----------------------------------------------

    def _attack_easy(self, st, team, slot) -> int:
        x, y = st.canon_pos(team, team, slot)
        fx, fy = st.flag_base(1)
        if st.has_flag[team][slot]:
            return W
        if x < fx and y != ATTACK_LANE_Y:
            return S if y > ATTACK_LANE_Y else N
        if x < fx:
            return E
        return N if y < fy else S if y > fy else STAY

    def _defend_easy(self, st, team, slot) -> int:
        period = max(1, 2 * (st.height - 5))  # short boards: hold row 2
        phase = st.step % period
        ty = 2 + (phase if phase <= period // 2 else period - phase)
        return _step_toward(st.canon_pos(team, team, slot), (min(PATROL_X, st.half - 1), ty))

    # -- medium / hard: greedy controllers --------------------------------

    def _attack_field(self, st, team, slot) -> int:
        me = st.canon_pos(team, team, slot)
        half = st.half
        enemy = 1 - team
        if st.has_flag[team][slot]:
            target = (half - 1, me[1])
        else:
            target = st.flag_base(1)
        threats = [
            st.canon_pos(team, enemy, s)
            for s in range(len(st.pos[enemy]))
            if st.canon_pos(team, enemy, s)[0] >= half and st.cooldown[enemy][s] == 0
        ]
        best = self._field_move(st, me, target, threats, half, lookahead=True)
        if best == STAY and me != target:
            # Standing still only because a motionless defender is two cells
            # away would deadlock the attack; keep avoiding adjacency only.
            best = self._field_move(st, me, target, threats, half, lookahead=False)
        return best

    @staticmethod
    def _field_move(st, me, target, threats, half, lookahead: bool) -> int:
        best, best_score = STAY, None
        for a in (E, N, S, W, STAY):
            dx, dy = MOVES[a]
            nxt = (min(max(me[0] + dx, 0), st.width - 1), min(max(me[1] + dy, 0), st.height - 1))
            score = float(manhattan(nxt, target))
            if nxt[0] >= half:
                for th in threats:
                    d = manhattan(nxt, th)
                    if d <= 1:
                        score += 4.0
                    elif d == 2 and lookahead:
                        score += 1.5
            if best_score is None or score < best_score:
                best, best_score = a, score
        return best

    def _defend_greedy(self, st, team, slot) -> int:
        me = st.canon_pos(team, team, slot)
        half = st.half
        enemy = 1 - team
        intruders = []
        for s in range(len(st.pos[enemy])):
            p = st.canon_pos(team, enemy, s)
            if p[0] < half:
                intruders.append((0 if st.has_flag[enemy][s] else 1, manhattan(p, me), p))
        if intruders:
            target = min(intruders)[2]
        else:
            fx, fy = st.flag_base(0)
            target = (fx + 3, fy)
        return _step_toward(me, target, allowed=lambda c: 0 <= c[0] < half and 0 <= c[1] < st.height)


def scripted_policy(kind: str, epsilon: float = 0.0) -> ScriptedPolicy:
    return ScriptedPolicy(kind, epsilon)


class StayPolicy:
    """Never moves; useful as a passive opponent."""

    needs_features = False
    speed = 1
    kind = "stay"

    def act(self, st, team, slot, features, rng) -> int:
        return STAY
