"""LP kernel, branch-and-bound and MPS exchange."""

from .lp import (Basis, BoundedLp, LpSolution, LpStatus, NumericalBreakdown, Tolerances,
                 refine_on_optimal_face, solve_lp)
from .milp import (MilpInfeasible, MilpSolution, TooManyBinaries, brute_force_milp,
                   fix_and_price, solve_milp)
from .mps import read_mps, write_model_mps, write_mps

__all__ = [
    "Basis", "BoundedLp", "LpSolution", "LpStatus", "MilpInfeasible", "MilpSolution",
    "NumericalBreakdown", "Tolerances", "TooManyBinaries", "brute_force_milp", "fix_and_price",
    "read_mps", "refine_on_optimal_face", "solve_lp", "solve_milp", "write_model_mps", "write_mps",
]
