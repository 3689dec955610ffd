"""maxmpc: exact certification of maxout-network approximations of explicit MPC.

The package computes explicit piecewise-affine MPC laws, synthesizes and
trains maxout networks that approximate (or exactly represent) them, and
certifies the maximum approximation error and the Lipschitz constant of
the error function by mixed-integer linear programming.
"""

from .geometry import Polytope
from .maxout import MaxoutLayer, MaxoutNetwork
from .mpc import OcpSpec, ParametricQp, PwaFunction
from .optim import (
    LinearProgram,
    MilpProblem,
    QuadraticProgram,
    SolveResult,
    solve_lp,
    solve_milp,
    solve_qp,
)

__version__ = "0.1.0"

__all__ = [
    "Polytope",
    "LinearProgram",
    "QuadraticProgram",
    "MilpProblem",
    "SolveResult",
    "solve_lp",
    "solve_qp",
    "solve_milp",
    "OcpSpec",
    "ParametricQp",
    "PwaFunction",
    "MaxoutLayer",
    "MaxoutNetwork",
    "__version__",
]
