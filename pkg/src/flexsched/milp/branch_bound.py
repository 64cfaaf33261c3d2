"""Best-bound branch and bound on top of the bounded-variable simplex.

Nodes live in a min-heap keyed by (parent LP bound, insertion sequence), so
the node with the most promising bound is expanded first and ties resolve by
age, which keeps the search deterministic.  Branching picks the integer
variable whose LP value is closest to 0.5 away from an integer, lowest id on
ties.  Integer-feasible LP points are "polished" before acceptance: the
integer variables are fixed to their exact rounded values and the LP is
re-solved warm, so incumbents carry exact integers and clean row residuals.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from ..errors import SolveError, ValidationError
from .problem import MilpProblem, ProblemArrays
from .simplex import LpSolution, solve_lp

INT_TOL = 1e-6      # integrality tolerance
BOUND_EPS = 1e-9    # absolute floor on the pruning epsilon
WARM_CAP = 4096     # stop storing warm-start states once the heap is this deep


@dataclass
class MilpSolution:
    """Result of a mixed-integer solve."""

    status: str              # optimal | feasible_gap | infeasible | unbounded | node_limit
    x: np.ndarray | None     # structural variable values of the incumbent
    objective: float | None
    best_bound: float        # proven lower bound on the optimum
    gap: float               # (objective - best_bound) / max(1, |objective|); inf without incumbent
    nodes: int               # LP nodes actually solved
    wall_time_s: float
    iterations: int = 0      # simplex iterations summed over all nodes
    message: str = ""


def _apply_overrides(arrays: ProblemArrays,
                     overrides: dict[int, tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    lo = arrays.lb.copy()
    hi = arrays.ub.copy()
    for j, (a, b) in overrides.items():
        lo[j] = a
        hi[j] = b
    return lo, hi


def _most_fractional(x: np.ndarray, int_idx: np.ndarray) -> tuple[int, float] | None:
    vals = x[int_idx]
    frac = vals - np.floor(vals)
    dist = np.minimum(frac, 1.0 - frac)
    worst = int(np.argmax(dist))  # argmax takes the first (lowest id) on ties
    if dist[worst] <= INT_TOL:
        return None
    return int(int_idx[worst]), float(vals[worst])


class _Search:
    def __init__(self, arrays: ProblemArrays, int_idx: np.ndarray,
                 rel_gap: float, node_limit: int, time_limit_s: float | None):
        self.arrays = arrays
        self.int_idx = int_idx
        self.rel_gap = rel_gap
        self.node_limit = node_limit
        self.time_limit_s = time_limit_s
        self.t0 = time.perf_counter()

        self.heap: list = []
        self.seq = 0
        self.nodes = 0
        self.iterations = 0
        self.incumbent: np.ndarray | None = None
        self.incumbent_obj = np.inf
        self.failed_nodes = 0
        self.hit_limit = False
        self.saw_unbounded = False

    # -- bookkeeping ------------------------------------------------------

    def _eps(self) -> float:
        if not np.isfinite(self.incumbent_obj):
            return BOUND_EPS
        return max(BOUND_EPS, self.rel_gap * max(1.0, abs(self.incumbent_obj)))

    def _push(self, bound: float, overrides: dict, warm):
        if len(self.heap) >= WARM_CAP:
            warm = None
        heapq.heappush(self.heap, (bound, self.seq, overrides, warm))
        self.seq += 1

    def _timed_out(self) -> bool:
        return (self.time_limit_s is not None
                and time.perf_counter() - self.t0 > self.time_limit_s)

    def _accept(self, lp: LpSolution, overrides: dict):
        """Polish an integer-feasible LP point and take it as incumbent if better."""
        fixed = dict(overrides)
        for j in self.int_idx:
            v = round(float(lp.x[j]))
            fixed[int(j)] = (float(v), float(v))
        lo, hi = _apply_overrides(self.arrays, fixed)
        polished = solve_lp(self.arrays, lower=lo, upper=hi,
                            warm=(lp.basis, lp.vstatus))
        self.iterations += polished.iterations
        if polished.status == "optimal":
            cand_x, cand_obj = polished.x, polished.objective
        else:
            cand_x, cand_obj = lp.x, lp.objective
        if cand_obj < self.incumbent_obj - 1e-12:
            self.incumbent = cand_x.copy()
            self.incumbent_obj = float(cand_obj)

    def _branch(self, lp: LpSolution, overrides: dict) -> bool:
        """Split on the most fractional integer; returns False if none is fractional."""
        pick = _most_fractional(lp.x, self.int_idx)
        if pick is None:
            return False
        j, v = pick
        lo_j = overrides.get(j, (self.arrays.lb[j], self.arrays.ub[j]))
        floor_v = np.floor(v)
        warm = (lp.basis, lp.vstatus)
        if floor_v >= lo_j[0]:
            down = dict(overrides)
            down[j] = (lo_j[0], float(floor_v))
            self._push(lp.objective, down, warm)
        if floor_v + 1.0 <= lo_j[1]:
            up = dict(overrides)
            up[j] = (float(floor_v + 1.0), lo_j[1])
            self._push(lp.objective, up, warm)
        return True

    def _solve_node(self, overrides: dict, warm) -> LpSolution:
        lo, hi = _apply_overrides(self.arrays, overrides)
        lp = solve_lp(self.arrays, lower=lo, upper=hi, warm=warm)
        self.iterations += lp.iterations
        if lp.status in ("iteration_limit", "numerical") and warm is not None:
            lp = solve_lp(self.arrays, lower=lo, upper=hi)  # retry cold
            self.iterations += lp.iterations
        return lp

    # -- main loop ---------------------------------------------------------

    def run(self, root: LpSolution) -> MilpSolution:
        self.nodes = 1
        self._round_heuristic(root)
        if not self._branch(root, {}):
            self._accept(root, {})

        while self.heap:
            if self.nodes >= self.node_limit or self._timed_out():
                self.hit_limit = True
                break
            bound = self.heap[0][0]
            if self.incumbent_obj - bound <= self._eps():
                break  # gap closed against the best open node
            _, _, overrides, warm = heapq.heappop(self.heap)

            lp = self._solve_node(overrides, warm)
            self.nodes += 1
            if lp.status == "infeasible":
                continue
            if lp.status == "unbounded":
                self.saw_unbounded = True
                break
            if lp.status != "optimal":
                self.failed_nodes += 1
                continue
            if lp.objective >= self.incumbent_obj - self._eps():
                continue
            if not self._branch(lp, overrides):
                self._accept(lp, overrides)

        return self._result()

    def _round_heuristic(self, root: LpSolution):
        """Fix every integer to the nearest value at the root; keep the point
        if the remaining LP is feasible.  Cheap and often gives a first
        incumbent that prunes most of the tree."""
        fixed = {int(j): (float(round(root.x[j])),) * 2 for j in self.int_idx}
        lo, hi = _apply_overrides(self.arrays, fixed)
        lp = solve_lp(self.arrays, lower=lo, upper=hi, warm=(root.basis, root.vstatus))
        self.iterations += lp.iterations
        if lp.status == "optimal" and lp.objective < self.incumbent_obj:
            self.incumbent = lp.x.copy()
            self.incumbent_obj = float(lp.objective)

    def _result(self) -> MilpSolution:
        wall = time.perf_counter() - self.t0
        open_bounds = [item[0] for item in self.heap]

        if self.saw_unbounded:
            return MilpSolution("unbounded", None, None, -np.inf, np.inf,
                                self.nodes, wall, self.iterations,
                                "a node relaxation is unbounded")
        if self.incumbent is None:
            if self.hit_limit:
                bound = min(open_bounds) if open_bounds else -np.inf
                return MilpSolution("node_limit", None, None, bound, np.inf,
                                    self.nodes, wall, self.iterations,
                                    "limit reached before any integer point was found")
            if self.failed_nodes:
                raise SolveError("numerical",
                                 f"{self.failed_nodes} node relaxations failed and "
                                 "no integer point was found")
            return MilpSolution("infeasible", None, None, np.inf, np.inf,
                                self.nodes, wall, self.iterations)

        obj = self.incumbent_obj
        if self.hit_limit:
            bound = min(open_bounds + [obj])
            gap = max(0.0, (obj - bound) / max(1.0, abs(obj)))
            return MilpSolution("node_limit", self.incumbent, obj, bound, gap,
                                self.nodes, wall, self.iterations,
                                f"stopped at {self.nodes} nodes")
        if self.failed_nodes:
            bound = min(open_bounds + [obj])
            gap = max(0.0, (obj - bound) / max(1.0, abs(obj)))
            return MilpSolution("feasible_gap", self.incumbent, obj, bound, gap,
                                self.nodes, wall, self.iterations,
                                f"{self.failed_nodes} node relaxations failed; "
                                "bound proof is incomplete")
        bound = min(open_bounds) if open_bounds else obj
        gap = max(0.0, (obj - bound) / max(1.0, abs(obj)))
        return MilpSolution("optimal", self.incumbent, obj, bound, gap,
                            self.nodes, wall, self.iterations)


def solve_milp(problem: MilpProblem | ProblemArrays, rel_gap: float = 1e-4,
               node_limit: int = 100000,
               time_limit_s: float | None = None) -> MilpSolution:
    """Minimize the problem over its mixed-integer feasible set.

    Returns status ``optimal`` when the incumbent is within ``rel_gap`` of the
    proven bound, ``node_limit`` when the node or time budget ran out (with
    the incumbent, if one was found), and ``infeasible``/``unbounded`` as
    detected.  Identical inputs give identical solutions and node counts.
    """
    arrays = problem.snapshot() if isinstance(problem, MilpProblem) else problem
    int_idx = np.nonzero(arrays.int_mask)[0]
    bad = int_idx[~(np.isfinite(arrays.lb[int_idx]) & np.isfinite(arrays.ub[int_idx]))]
    if bad.size:
        raise ValidationError(
            f"integer variable {int(bad[0])} must have finite bounds")

    t0 = time.perf_counter()
    root = solve_lp(arrays)
    if root.status == "infeasible":
        return MilpSolution("infeasible", None, None, np.inf, np.inf, 1,
                            time.perf_counter() - t0, root.iterations,
                            root.message)
    if root.status == "unbounded":
        return MilpSolution("unbounded", None, None, -np.inf, np.inf, 1,
                            time.perf_counter() - t0, root.iterations,
                            root.message)
    if root.status != "optimal":
        raise SolveError(root.status, f"root relaxation failed: {root.message}")

    if int_idx.size == 0:
        return MilpSolution("optimal", root.x, root.objective, root.objective,
                            0.0, 1, time.perf_counter() - t0, root.iterations)

    search = _Search(arrays, int_idx, rel_gap, node_limit, time_limit_s)
    search.t0 = t0
    search.iterations = root.iterations
    return search.run(root)
