from .trap import TrapScenario, trap_protocol_paper
from .rlc import RlcScenario, RlcResult, rlc_experiment
from .sweep import figure1_sweep, default_grid

__all__ = [
    "TrapScenario",
    "trap_protocol_paper",
    "RlcScenario",
    "RlcResult",
    "rlc_experiment",
    "figure1_sweep",
    "default_grid",
]
