"""Self-contained LP/MILP solving engine.

`MilpProblem` collects variables and sparse rows; `solve_lp` runs the
bounded-variable revised simplex; `solve_milp` wraps it in best-bound branch
and bound; `check_point` re-evaluates any value vector against the raw problem
data so solutions can be verified independently of the solver.
"""

from .branch_bound import INT_TOL, MilpSolution, solve_milp
from .problem import (EQ, GE, INFINITY, LE, MilpProblem, ProblemArrays,
                      ResidualReport, check_point, dump_problem, load_problem)
from .simplex import FEAS_TOL, LpSolution, solve_lp

__all__ = [
    "EQ", "GE", "LE", "INFINITY", "FEAS_TOL", "INT_TOL",
    "MilpProblem", "ProblemArrays", "ResidualReport",
    "LpSolution", "MilpSolution",
    "solve_lp", "solve_milp", "check_point",
    "dump_problem", "load_problem",
]
