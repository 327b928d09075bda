"""Big-M mixed-integer sizing solved by in-house LP relaxation branch and bound."""

from .bnb import MilpSolution, branch_and_bound
from .instance import MilpInstance, build_instance
from .relaxation import LpRelaxation, solve_lp_relaxation
from .simplex import LpResult, solve_lp
from .sweep import SweepRow, downsample_sweep

__all__ = [
    "LpRelaxation",
    "LpResult",
    "MilpInstance",
    "MilpSolution",
    "SweepRow",
    "branch_and_bound",
    "build_instance",
    "downsample_sweep",
    "solve_lp",
    "solve_lp_relaxation",
]
