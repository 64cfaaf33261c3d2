"""Sparse MILP container, feasibility verifier, and plain-text dump format.

A problem is a list of bounded variables (optionally integer) plus sparse
constraint rows with sense <=, = or >=.  The objective sense is fixed to
minimize.  Construction is incremental (builder style); the solver snapshots
the problem into numpy/scipy arrays when a solve starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

INFINITY = float("inf")


@dataclass
class _Row:
    indices: np.ndarray
    coefs: np.ndarray
    sense: str
    rhs: float
    name: str


class MilpProblem:
    """Minimization MILP built incrementally from variables and sparse rows."""

    def __init__(self, name: str = "milp"):
        self.name = name
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: list[float] = []
        self.is_integer: list[bool] = []
        self.rows: list[_Row] = []
        self._name_to_id: dict[str, int] = {}
        # scratch space for callers that need to map variables back to domain
        # objects (e.g. the scheduler's variable index); never touched here
        self.metadata: dict = {}

    # -- construction ------------------------------------------------------

    def add_variable(self, name: str = "", lower: float = 0.0, upper: float = INFINITY,
                     objective: float = 0.0, integer: bool = False) -> int:
        vid = len(self.var_names)
        if not name:
            name = f"x{vid}"
        if any(ch.isspace() for ch in name):
            raise ValidationError(f"variable name {name!r} contains whitespace")
        if name in self._name_to_id:
            raise ValidationError(f"duplicate variable name {name!r}")
        if math.isnan(lower) or math.isnan(upper) or not math.isfinite(objective):
            raise ValidationError(f"variable {name!r}: bounds/objective must not be NaN")
        if lower > upper:
            raise ValidationError(f"variable {name!r}: lower {lower} > upper {upper}")
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(objective))
        self.is_integer.append(bool(integer))
        self._name_to_id[name] = vid
        return vid

    def add_row(self, coeffs: Iterable[tuple[int, float]], sense: str, rhs: float,
                name: str = "") -> int:
        if sense not in _SENSES:
            raise ValidationError(f"unknown row sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValidationError(f"row {name!r}: rhs must be finite, got {rhs}")
        pairs = list(coeffs)
        # merge duplicate variable references so the verifier and solver agree
        merged: dict[int, float] = {}
        for vid, coef in pairs:
            if not 0 <= vid < len(self.var_names):
                raise ValidationError(f"row {name!r} references unknown variable id {vid}")
            if not math.isfinite(coef):
                raise ValidationError(f"row {name!r}: coefficient for var {vid} not finite")
            merged[vid] = merged.get(vid, 0.0) + float(coef)
        rid = len(self.rows)
        if not name:
            name = f"r{rid}"
        if any(ch.isspace() for ch in name):
            raise ValidationError(f"row name {name!r} contains whitespace")
        idx = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        order = np.argsort(idx)
        idx = idx[order]
        coefs = np.fromiter(merged.values(), dtype=float, count=len(merged))[order]
        self.rows.append(_Row(idx, coefs, sense, float(rhs), name))
        return rid

    def variable_id(self, name: str) -> int:
        return self._name_to_id[name]

    # -- introspection -----------------------------------------------------

    @property
    def n_variables(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_integer(self) -> int:
        return sum(self.is_integer)

    def snapshot(self) -> "ProblemArrays":
        """Freeze the current problem state into solver-ready arrays."""
        n, m = self.n_variables, self.n_rows
        if m:
            counts = [len(r.indices) for r in self.rows]
            nnz = sum(counts)
            data = np.empty(nnz)
            col = np.empty(nnz, dtype=np.int64)
            rowi = np.empty(nnz, dtype=np.int64)
            at = 0
            for i, r in enumerate(self.rows):
                w = len(r.indices)
                data[at:at + w] = r.coefs
                col[at:at + w] = r.indices
                rowi[at:at + w] = i
                at += w
            matrix = sp.csc_matrix((data, (rowi, col)), shape=(m, n))
        else:
            matrix = sp.csc_matrix((0, n))
        return ProblemArrays(
            matrix=matrix,
            senses=np.array([r.sense for r in self.rows]),
            rhs=np.array([r.rhs for r in self.rows], dtype=float),
            c=np.array(self.objective, dtype=float),
            lb=np.array(self.lower, dtype=float),
            ub=np.array(self.upper, dtype=float),
            int_mask=np.array(self.is_integer, dtype=bool),
        )


@dataclass
class ProblemArrays:
    """Immutable numeric snapshot of a MilpProblem."""

    matrix: sp.csc_matrix
    senses: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    int_mask: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


@dataclass
class ResidualReport:
    """Independent feasibility check of a candidate point against a problem."""

    max_bound_violation: float
    max_row_violation: float
    max_integrality_deviation: float
    worst_row: str = ""
    worst_variable: str = ""

    def ok(self, feas_tol: float = 1e-7, int_tol: float = 1e-6) -> bool:
        return (self.max_bound_violation <= feas_tol
                and self.max_row_violation <= feas_tol
                and self.max_integrality_deviation <= int_tol)


def check_point(problem: MilpProblem, values: Sequence[float]) -> ResidualReport:
    """Measure how far a full value vector is from satisfying the problem.

    Deliberately recomputes everything from the raw row data rather than any
    solver state, so it can act as an impartial verifier in tests.
    """
    x = np.asarray(values, dtype=float)
    if x.shape != (problem.n_variables,):
        raise ValidationError(
            f"value vector has shape {x.shape}, need ({problem.n_variables},)")

    max_bound = 0.0
    worst_var = ""
    for j, (lo, hi) in enumerate(zip(problem.lower, problem.upper)):
        viol = max(lo - x[j], x[j] - hi, 0.0)
        if viol > max_bound:
            max_bound = viol
            worst_var = problem.var_names[j]

    max_row = 0.0
    worst_row = ""
    for r in problem.rows:
        lhs = float(np.dot(r.coefs, x[r.indices]))
        if r.sense == LE:
            viol = lhs - r.rhs
        elif r.sense == GE:
            viol = r.rhs - lhs
        else:
            viol = abs(lhs - r.rhs)
        if viol > max_row:
            max_row = viol
            worst_row = r.name

    max_int = 0.0
    for j, is_int in enumerate(problem.is_integer):
        if is_int:
            max_int = max(max_int, abs(x[j] - round(x[j])))

    return ResidualReport(max(max_bound, 0.0), max(max_row, 0.0), max_int,
                          worst_row, worst_var)


# -- plain-text dump -------------------------------------------------------
#
# Line-oriented format for external cross-checking (see docs/formats.md):
#
#   flexsched-milp 1
#   problem <name>
#   minimize
#   variables <n>
#   <name> <lower> <upper> <objective> <C|I>     (n lines)
#   rows <m>
#   <name> <sense> <rhs> <nnz> <var>:<coef> ...  (m lines)
#   end
#
# Floats are written with repr() so a round trip is bit-exact; infinities are
# written as inf / -inf.

def _fmt(v: float) -> str:
    return repr(float(v))


def dump_problem(problem: MilpProblem) -> str:
    out = ["flexsched-milp 1", f"problem {problem.name}", "minimize",
           f"variables {problem.n_variables}"]
    for j in range(problem.n_variables):
        kind = "I" if problem.is_integer[j] else "C"
        out.append(f"{problem.var_names[j]} {_fmt(problem.lower[j])} "
                   f"{_fmt(problem.upper[j])} {_fmt(problem.objective[j])} {kind}")
    out.append(f"rows {problem.n_rows}")
    for r in problem.rows:
        terms = " ".join(f"{int(v)}:{_fmt(c)}" for v, c in zip(r.indices, r.coefs))
        out.append(f"{r.name} {r.sense} {_fmt(r.rhs)} {len(r.indices)}"
                   + (f" {terms}" if terms else ""))
    out.append("end")
    return "\n".join(out) + "\n"


def load_problem(text: str) -> MilpProblem:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    it = iter(lines)

    def need(expect: str) -> str:
        ln = next(it, None)
        if ln is None or not ln.startswith(expect):
            raise ValidationError(f"dump parse error: expected {expect!r}, got {ln!r}")
        return ln

    need("flexsched-milp 1")
    name = need("problem ").split(" ", 1)[1]
    need("minimize")
    n = int(need("variables ").split()[1])
    prob = MilpProblem(name)
    for _ in range(n):
        vname, lo, hi, obj, kind = next(it).split()
        prob.add_variable(vname, float(lo), float(hi), float(obj), integer=(kind == "I"))
    m = int(need("rows ").split()[1])
    for _ in range(m):
        parts = next(it).split()
        rname, sense, rhs, nnz = parts[0], parts[1], float(parts[2]), int(parts[3])
        coeffs = []
        for term in parts[4:4 + nnz]:
            vid, coef = term.split(":")
            coeffs.append((int(vid), float(coef)))
        prob.add_row(coeffs, sense, rhs, name=rname)
    need("end")
    return prob
