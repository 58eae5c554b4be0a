from .aggression import evaluate_agent_aggression
from .base import EventCounts, GameResult, TeamGame, Trajectory, aggression_metric
from .gridctf import N_ACTIONS, N_FEATURES, GridCTF, GridCTFState, observe, write_replay
from .matrix import MatrixTeamGame, canon, seven_policy_fixture
from .scripted import FIXED_POLICY_KINDS, ScriptedPolicy, StayPolicy, scripted_policy

__all__ = [
    "EventCounts",
    "FIXED_POLICY_KINDS",
    "GameResult",
    "GridCTF",
    "GridCTFState",
    "MatrixTeamGame",
    "N_ACTIONS",
    "N_FEATURES",
    "ScriptedPolicy",
    "StayPolicy",
    "TeamGame",
    "Trajectory",
    "aggression_metric",
    "canon",
    "evaluate_agent_aggression",
    "observe",
    "scripted_policy",
    "seven_policy_fixture",
    "write_replay",
]
