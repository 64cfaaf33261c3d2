"""Revised primal simplex with bounded variables.

Internal standard form: every constraint row gets a logical variable so that
``A_full @ x == rhs`` exactly, where ``A_full = [A | I]``; the logical's bounds
encode the row sense (<= gives [0, inf), >= gives (-inf, 0], = gives [0, 0]).
The starting basis is the logical identity; primal infeasibility is driven out
by a composite phase 1 that minimizes the total bound violation of the basic
variables and therefore also works from any warm-start basis.

The basis inverse is kept as a sparse LU factorization (SuperLU) plus a
product-form eta file, refactorized every ``refactor_every`` pivots.  Pricing
is Dantzig (most negative reduced cost) with a fall back to Bland's rule after
a run of degenerate pivots, which guarantees finiteness.  All tie-breaking is
by lowest index, so repeated solves of the same problem are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SolveError, ValidationError
from .problem import EQ, GE, LE, MilpProblem, ProblemArrays

# variable status codes
AT_LOWER, AT_UPPER, BASIC, FREE_ZERO = 0, 1, 2, 3

FEAS_TOL = 1e-7      # primal feasibility
DUAL_TOL = 1e-9      # reduced-cost threshold for entering candidates
PIVOT_TOL = 1e-9     # smallest acceptable pivot element
DEGEN_TOL = 1e-10    # step sizes below this count as degenerate


@dataclass
class LpSolution:
    """Result of one LP solve (integrality ignored)."""

    status: str                      # optimal | infeasible | unbounded | iteration_limit | numerical
    x: np.ndarray | None             # structural variable values
    objective: float | None
    dual_objective: float | None
    duals: np.ndarray | None         # one multiplier per row
    reduced_costs: np.ndarray | None # structural reduced costs
    iterations: int
    infeasibility: float = 0.0       # residual phase-1 sum when infeasible
    basis: np.ndarray | None = None      # warm-start state: basic variable ids
    vstatus: np.ndarray | None = None    # warm-start state: per-variable status
    ray: np.ndarray | None = None        # unbounded direction (structural) when unbounded
    message: str = ""


class _Factor:
    """Sparse LU of the basis matrix plus a product-form eta file."""

    def __init__(self, cols: "_Columns", basis: np.ndarray):
        self.cols = cols
        self.m = len(basis)
        B = cols.basis_matrix(basis)
        self.lu = splu(B.tocsc(), permc_spec="COLAMD",
                       options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray, float]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        w = self.lu.solve(v)
        for p, alpha, ap in self.etas:
            wp = w[p] / ap
            w -= alpha * wp
            w[p] = wp
        return w

    def btran(self, v: np.ndarray) -> np.ndarray:
        w = v.copy()
        for p, alpha, ap in reversed(self.etas):
            w[p] = (w[p] - (alpha @ w) + ap * w[p]) / ap
        return self.lu.solve(w, trans="T")

    def update(self, p: int, alpha: np.ndarray):
        self.etas.append((p, alpha.copy(), float(alpha[p])))

    @property
    def n_etas(self) -> int:
        return len(self.etas)


class _Columns:
    """Column access to [A | I] without materializing the identity block."""

    def __init__(self, matrix: sp.csc_matrix):
        self.m, self.n = matrix.shape
        self.indptr = matrix.indptr
        self.indices = matrix.indices
        self.data = matrix.data
        self.at = matrix.T.tocsr()  # for pricing: (A^T y) in one matvec

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j < self.n:
            s, e = self.indptr[j], self.indptr[j + 1]
            col[self.indices[s:e]] = self.data[s:e]
        else:
            col[j - self.n] = 1.0
        return col

    def basis_matrix(self, basis: np.ndarray) -> sp.csc_matrix:
        rows, cols, vals = [], [], []
        for pos, j in enumerate(basis):
            if j < self.n:
                s, e = self.indptr[j], self.indptr[j + 1]
                rows.extend(self.indices[s:e])
                vals.extend(self.data[s:e])
                cols.extend([pos] * (e - s))
            else:
                rows.append(j - self.n)
                cols.append(pos)
                vals.append(1.0)
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.m, self.m))

    def struct_reduced(self, c_struct: np.ndarray, y: np.ndarray) -> np.ndarray:
        return c_struct - self.at.dot(y)


def _logical_bounds(senses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = len(senses)
    lo = np.zeros(m)
    hi = np.zeros(m)
    for i, s in enumerate(senses):
        if s == LE:
            lo[i], hi[i] = 0.0, np.inf
        elif s == GE:
            lo[i], hi[i] = -np.inf, 0.0
        else:
            lo[i], hi[i] = 0.0, 0.0
    return lo, hi


class _Engine:
    def __init__(self, arrays: ProblemArrays,
                 lb: np.ndarray, ub: np.ndarray,
                 refactor_every: int = 100, max_iters: int | None = None):
        self.cols = _Columns(arrays.matrix)
        self.m, self.n = self.cols.m, self.cols.n
        self.N = self.n + self.m
        log_lo, log_hi = _logical_bounds(arrays.senses)
        self.lb = np.concatenate([lb, log_lo])
        self.ub = np.concatenate([ub, log_hi])
        self.c = np.concatenate([arrays.c, np.zeros(self.m)])
        self.rhs = arrays.rhs
        self.refactor_every = refactor_every
        self.max_iters = max_iters if max_iters is not None else 5000 + 30 * (self.m + self.n)

        self.basis = np.empty(self.m, dtype=np.int64)
        self.vstatus = np.empty(self.N, dtype=np.int8)
        self.x = np.zeros(self.N)
        self.factor: _Factor | None = None
        self.iterations = 0

    # -- state management ----------------------------------------------

    def _nonbasic_value(self, j: int) -> tuple[float, int]:
        lo, hi = self.lb[j], self.ub[j]
        if np.isfinite(lo):
            return lo, AT_LOWER
        if np.isfinite(hi):
            return hi, AT_UPPER
        return 0.0, FREE_ZERO

    def cold_start(self):
        for j in range(self.N):
            if j >= self.n:
                continue
            self.x[j], self.vstatus[j] = self._nonbasic_value(j)
        self.basis = np.arange(self.n, self.N, dtype=np.int64)
        self.vstatus[self.n:] = BASIC
        self._refactor()

    def warm_start(self, basis: np.ndarray, vstatus: np.ndarray) -> bool:
        basis = np.asarray(basis, dtype=np.int64)
        vstatus = np.asarray(vstatus, dtype=np.int8).copy()
        if basis.shape != (self.m,) or vstatus.shape != (self.N,):
            return False
        if len(np.unique(basis)) != self.m or basis.min() < 0 or basis.max() >= self.N:
            return False
        self.basis = basis.copy()
        self.vstatus = vstatus
        self.vstatus[self.basis] = BASIC
        for j in range(self.N):
            if self.vstatus[j] == BASIC:
                continue
            # bounds may have moved since the warm state was recorded
            if self.vstatus[j] == AT_LOWER and np.isfinite(self.lb[j]):
                self.x[j] = self.lb[j]
            elif self.vstatus[j] == AT_UPPER and np.isfinite(self.ub[j]):
                self.x[j] = self.ub[j]
            else:
                self.x[j], self.vstatus[j] = self._nonbasic_value(j)
        try:
            self._refactor()
        except RuntimeError:
            return False
        return True

    def _refactor(self):
        self.factor = _Factor(self.cols, self.basis)
        self._recompute_basics()

    def _recompute_basics(self):
        xs = self.x[:self.n].copy()
        xs[self.basis[self.basis < self.n]] = 0.0
        s = self.rhs - self.cols.at.T.dot(xs)
        log_vals = self.x[self.n:].copy()
        log_vals[self.basis[self.basis >= self.n] - self.n] = 0.0
        s -= log_vals
        self.x[self.basis] = self.factor.ftran(s)

    # -- pricing ----------------------------------------------------------

    def _phase_costs(self) -> tuple[np.ndarray, float, bool]:
        """Return (cost vector over basics by position, infeasibility sum, is_phase1)."""
        xb = self.x[self.basis]
        lo, hi = self.lb[self.basis], self.ub[self.basis]
        below = lo - xb
        above = xb - hi
        infeas = np.sum(below[below > FEAS_TOL]) + np.sum(above[above > FEAS_TOL])
        if infeas > FEAS_TOL:
            d = np.zeros(self.m)
            d[below > FEAS_TOL] = -1.0
            d[above > FEAS_TOL] = 1.0
            return d, float(infeas), True
        return self.c[self.basis], 0.0, False

    def _reduced_costs(self, d_basis: np.ndarray, phase1: bool) -> tuple[np.ndarray, np.ndarray]:
        y = self.factor.btran(d_basis)
        c_struct = np.zeros(self.n) if phase1 else self.c[:self.n]
        r = np.empty(self.N)
        r[:self.n] = self.cols.struct_reduced(c_struct, y)
        r[self.n:] = -y  # logicals cost 0 in both phases
        return r, y

    def _entering(self, r: np.ndarray, bland: bool) -> tuple[int, int] | None:
        st = self.vstatus
        elig_lo = (st == AT_LOWER) & (r < -DUAL_TOL)
        elig_hi = (st == AT_UPPER) & (r > DUAL_TOL)
        elig_fr = (st == FREE_ZERO) & (np.abs(r) > DUAL_TOL)
        eligible = elig_lo | elig_hi | elig_fr
        if not eligible.any():
            return None
        if bland:
            q = int(np.nonzero(eligible)[0][0])
        else:
            score = np.where(eligible, np.abs(r), 0.0)
            q = int(np.argmax(score))
        if elig_lo[q]:
            return q, +1
        if elig_hi[q]:
            return q, -1
        return q, +1 if r[q] < 0 else -1

    # -- ratio test ---------------------------------------------------------

    def _ratio_test(self, q: int, direction: int, alpha: np.ndarray,
                    phase1: bool, bland: bool):
        """Return ('flip', theta) | ('pivot', theta, pos, target, stat) | ('unbounded',)."""
        rate = -direction * alpha
        xb = self.x[self.basis]
        lo, hi = self.lb[self.basis], self.ub[self.basis]
        below = (lo - xb) > FEAS_TOL
        above = (xb - hi) > FEAS_TOL
        inside = ~(below | above)

        theta = np.full(self.m, np.inf)
        target = np.zeros(self.m)
        tstat = np.zeros(self.m, dtype=np.int8)

        dn = inside & (rate < -PIVOT_TOL) & np.isfinite(lo)
        theta[dn] = (xb[dn] - lo[dn]) / (-rate[dn])
        target[dn] = lo[dn]
        tstat[dn] = AT_LOWER

        up = inside & (rate > PIVOT_TOL) & np.isfinite(hi)
        theta[up] = (hi[up] - xb[up]) / rate[up]
        target[up] = hi[up]
        tstat[up] = AT_UPPER

        if phase1:
            blo = below & (rate > PIVOT_TOL)
            theta[blo] = (lo[blo] - xb[blo]) / rate[blo]
            target[blo] = lo[blo]
            tstat[blo] = AT_LOWER

            bhi = above & (rate < -PIVOT_TOL)
            theta[bhi] = (xb[bhi] - hi[bhi]) / (-rate[bhi])
            target[bhi] = hi[bhi]
            tstat[bhi] = AT_UPPER

        np.maximum(theta, 0.0, out=theta)
        tmin_basic = float(theta.min()) if self.m else np.inf

        span = self.ub[q] - self.lb[q]
        theta_flip = span if np.isfinite(span) else np.inf

        if theta_flip <= tmin_basic:
            if not np.isfinite(theta_flip):
                return ("unbounded",)
            return ("flip", theta_flip)
        if not np.isfinite(tmin_basic):
            return ("unbounded",)

        cand = np.nonzero(theta <= tmin_basic + 1e-10)[0]
        if bland:
            pos = int(cand[np.argmin(self.basis[cand])])
        else:
            pos = int(cand[np.argmax(np.abs(alpha[cand]))])
        return ("pivot", tmin_basic, pos, float(target[pos]), int(tstat[pos]))

    # -- main loop -----------------------------------------------------------

    def run(self) -> LpSolution:
        degen_run = 0
        bland = False
        bland_threshold = 3 * (self.m + self.N)
        fresh = True  # factorization freshly rebuilt, nothing pivoted since

        while True:
            if self.iterations >= self.max_iters:
                return self._abnormal("iteration_limit",
                                      f"no convergence in {self.max_iters} iterations")
            if self.factor.n_etas >= self.refactor_every:
                self._refactor()
                fresh = True

            d_basis, infeas, phase1 = self._phase_costs()
            r, y = self._reduced_costs(d_basis, phase1)
            choice = self._entering(r, bland)

            if choice is None:
                if not fresh:
                    # confirm termination against a clean factorization
                    self._refactor()
                    fresh = True
                    continue
                if phase1:
                    return self._abnormal("infeasible",
                                          f"phase-1 residual {infeas:.3e}",
                                          infeasibility=infeas)
                return self._optimal(r, y)

            q, direction = choice
            alpha = self.factor.ftran(self.cols.column(q))
            outcome = self._ratio_test(q, direction, alpha, phase1, bland)

            if outcome[0] == "unbounded":
                if phase1:
                    if not fresh:
                        self._refactor()
                        fresh = True
                        continue
                    return self._abnormal("numerical",
                                          "phase-1 direction unbounded (numerical breakdown)")
                ray = np.zeros(self.N)
                ray[q] = direction
                ray[self.basis] = -direction * alpha
                return self._abnormal("unbounded", f"variable {q} unbounded", ray=ray[:self.n])

            self.iterations += 1
            if outcome[0] == "flip":
                theta = outcome[1]
                self.x[q] += direction * theta
                self.x[self.basis] -= direction * theta * alpha
                self.vstatus[q] = AT_UPPER if self.vstatus[q] == AT_LOWER else AT_LOWER
                degen_run = 0
                bland = False
                continue

            _, theta, pos, target, tstat = outcome
            if abs(alpha[pos]) < PIVOT_TOL:
                if not fresh:
                    self._refactor()
                    fresh = True
                    continue
                return self._abnormal("numerical",
                                      f"pivot element {alpha[pos]:.3e} below tolerance")

            leaving = int(self.basis[pos])
            self.x[q] += direction * theta
            self.x[self.basis] -= direction * theta * alpha
            self.x[leaving] = target
            self.vstatus[leaving] = tstat
            self.basis[pos] = q
            self.vstatus[q] = BASIC
            self.factor.update(pos, alpha)
            fresh = False

            if theta <= DEGEN_TOL:
                degen_run += 1
                if degen_run > bland_threshold:
                    bland = True
            else:
                degen_run = 0
                bland = False

    # -- termination --------------------------------------------------------

    def _optimal(self, r: np.ndarray, y: np.ndarray) -> LpSolution:
        x = self.x
        obj = float(self.c[:self.n] @ x[:self.n])
        nonbasic = self.vstatus != BASIC
        dual_obj = float(y @ self.rhs + r[nonbasic] @ x[nonbasic])
        return LpSolution(
            status="optimal", x=x[:self.n].copy(), objective=obj,
            dual_objective=dual_obj, duals=y.copy(),
            reduced_costs=r[:self.n].copy(), iterations=self.iterations,
            basis=self.basis.copy(), vstatus=self.vstatus.copy())

    def _abnormal(self, status: str, message: str, infeasibility: float = 0.0,
                  ray: np.ndarray | None = None) -> LpSolution:
        return LpSolution(
            status=status, x=None, objective=None, dual_objective=None,
            duals=None, reduced_costs=None, iterations=self.iterations,
            infeasibility=infeasibility, basis=self.basis.copy(),
            vstatus=self.vstatus.copy(), ray=ray, message=message)


def _solve_rowless(c: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> LpSolution:
    """Fast path for problems with no rows: each variable sits at the bound
    favored by its cost."""
    n = len(c)
    x = np.zeros(n)
    for j in range(n):
        if c[j] > 0:
            pick = lb[j]
        elif c[j] < 0:
            pick = ub[j]
        else:
            pick = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
        if not np.isfinite(pick):
            ray = np.zeros(n)
            ray[j] = -np.sign(c[j])
            return LpSolution("unbounded", None, None, None, None, None, 0, ray=ray,
                              message=f"variable {j} unbounded")
        x[j] = pick
    obj = float(c @ x)
    return LpSolution("optimal", x, obj, obj, np.zeros(0), c.copy(), 0,
                      basis=np.zeros(0, dtype=np.int64),
                      vstatus=np.full(n, AT_LOWER, dtype=np.int8))


def solve_lp(problem: MilpProblem | ProblemArrays, *,
             lower: np.ndarray | None = None, upper: np.ndarray | None = None,
             warm: tuple[np.ndarray, np.ndarray] | None = None,
             refactor_every: int = 100, max_iters: int | None = None) -> LpSolution:
    """Solve the LP relaxation of ``problem``.

    ``lower``/``upper`` override the structural variable bounds (used by
    branch and bound); ``warm`` is a (basis, vstatus) pair from a previous
    solution of a problem with identical shape.  Raises SolveError only for
    malformed inputs; infeasible/unbounded outcomes are reported in the
    returned status.
    """
    arrays = problem.snapshot() if isinstance(problem, MilpProblem) else problem
    lb = arrays.lb if lower is None else np.asarray(lower, dtype=float)
    ub = arrays.ub if upper is None else np.asarray(upper, dtype=float)
    if lb.shape != (arrays.n,) or ub.shape != (arrays.n,):
        raise ValidationError("bound override has wrong shape")
    if np.any(lb > ub):
        j = int(np.nonzero(lb > ub)[0][0])
        return LpSolution("infeasible", None, None, None, None, None, 0,
                          infeasibility=float(lb[j] - ub[j]),
                          message=f"variable {j}: lower {lb[j]} > upper {ub[j]}")
    if arrays.m == 0:
        return _solve_rowless(arrays.c, lb, ub)

    eng = _Engine(arrays, lb, ub, refactor_every=refactor_every, max_iters=max_iters)
    started = False
    if warm is not None:
        started = eng.warm_start(*warm)
    if not started:
        eng.cold_start()
    return eng.run()
