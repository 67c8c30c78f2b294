"""Teleportation with local entanglement reset: state simulator, protocol, exact analysis, Monte Carlo."""
from .protocol import ProtocolConfig, Strategy, UnknownQubit, run_teleport
from .analysis import build_tree, cost_summary, one_bit_probability
from .montecarlo import TrialConfig, compare, run_trials

__all__ = [
    "ProtocolConfig",
    "Strategy",
    "UnknownQubit",
    "run_teleport",
    "build_tree",
    "cost_summary",
    "one_bit_probability",
    "TrialConfig",
    "compare",
    "run_trials",
]
