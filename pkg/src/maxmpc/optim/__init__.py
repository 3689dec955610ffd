"""Dense deterministic LP / QP / MILP kernel."""

from .active_set import solve_qp
from .branch_bound import solve_milp
from .problems import LinearProgram, MilpProblem, QuadraticProgram, SolveResult
from .simplex import solve_lp

__all__ = [
    "LinearProgram",
    "QuadraticProgram",
    "MilpProblem",
    "SolveResult",
    "solve_lp",
    "solve_qp",
    "solve_milp",
]
