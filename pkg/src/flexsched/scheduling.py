"""Microgrid optimal scheduling as a MILP.

Builds the day-ahead commitment + intra-hour dispatch problem from a
MicrogridModel: hourly unit commitment binaries with startups and min up/down
counting, per-step continuous dispatch, storage energy recursion, adjustable
loads as energy-over-window, and the signed grid exchange.  Commitment is
shared across islanding scenarios (decided before the contingency is known)
while all continuous dispatch is per-scenario recourse.

Two modes: price_based minimizes cost against the market price alone;
flexibility_oriented additionally enforces an ExchangeEnvelope so the feeder
net load stays inside the operator's ramp caps.

Sign and cost conventions: exchange > 0 imports at the market price, exchange
< 0 exports at the same price (revenue), so the energy-exchange cost term is
just price * exchange * step_hours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExchangeEnvelope, Profile, ScenarioSet, TimeGrid
from .errors import (GridMismatchError, IntegrityError, ModelBuildError,
                     SolveError, ValidationError)
from .milp import INT_TOL, MilpProblem, MilpSolution

PRICE_BASED = "price_based"
FLEXIBILITY_ORIENTED = "flexibility_oriented"
MODES = (PRICE_BASED, FLEXIBILITY_ORIENTED)

#: Relative tolerance for the recomputed-cost integrity check in extract_schedule.
COST_TOL = 1e-6


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchableUnit:
    """Controllable generator with hourly commitment.

    Power limits in MW, marginal_cost in currency/MWh, no_load_cost in
    currency per committed hour, startup_cost per 0->1 transition, ramps in MW
    per intra-hour step, min_up/min_down in whole hours.  Units start the
    horizon offline.
    """

    id: str
    p_min: float
    p_max: float
    marginal_cost: float
    no_load_cost: float = 0.0
    startup_cost: float = 0.0
    ramp_up: float = float("inf")
    ramp_down: float = float("inf")
    min_up: int = 1
    min_down: int = 1

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise ValidationError(
                f"unit '{self.id}': need 0 <= p_min <= p_max, "
                f"got [{self.p_min}, {self.p_max}]")
        for name in ("marginal_cost", "no_load_cost", "startup_cost"):
            if getattr(self, name) < 0:
                raise ValidationError(f"unit '{self.id}': {name} must be >= 0")
        if not (self.ramp_up > 0 and self.ramp_down > 0):
            raise ValidationError(f"unit '{self.id}': ramps must be > 0")
        if self.min_up < 1 or self.min_down < 1:
            raise ValidationError(f"unit '{self.id}': min_up/min_down must be >= 1")


@dataclass(frozen=True)
class NondispatchableUnit:
    """Renewable with a fixed forecast trace (MW, nonnegative); always injected."""

    id: str
    trace: Profile

    def __post_init__(self):
        if np.any(self.trace.values < 0):
            raise ValidationError(f"renewable '{self.id}': trace must be >= 0")


@dataclass(frozen=True)
class Storage:
    """Energy storage with charge/discharge efficiency and an energy window.

    Simultaneous charge and discharge is excluded with one binary per step and
    scenario, but only when eta_charge*eta_discharge < 1 (with lossless round
    trips the overlap is a harmless no-op and the binary is omitted).
    """

    id: str
    capacity_MWh: float
    e_min_MWh: float
    charge_max: float
    discharge_max: float
    eta_charge: float = 1.0
    eta_discharge: float = 1.0
    initial_energy_MWh: float = 0.0
    terminal_min_MWh: float | None = None  # None -> defaults to initial energy

    def __post_init__(self):
        if not 0 <= self.e_min_MWh <= self.initial_energy_MWh <= self.capacity_MWh:
            raise ValidationError(
                f"storage '{self.id}': need 0 <= e_min <= initial <= capacity")
        if self.terminal_min > self.capacity_MWh:
            raise ValidationError(
                f"storage '{self.id}': terminal_min must be <= capacity")
        if not (self.charge_max > 0 and self.discharge_max > 0):
            raise ValidationError(f"storage '{self.id}': rates must be > 0")
        for name in ("eta_charge", "eta_discharge"):
            if not 0 < getattr(self, name) <= 1:
                raise ValidationError(f"storage '{self.id}': {name} must be in (0, 1]")

    @property
    def terminal_min(self) -> float:
        if self.terminal_min_MWh is None:
            return self.initial_energy_MWh
        return self.terminal_min_MWh

    @property
    def needs_exclusivity(self) -> bool:
        return self.eta_charge * self.eta_discharge < 1.0


@dataclass(frozen=True)
class AdjustableLoad:
    """Demand that must receive total_energy_MWh inside a (t, k) window.

    window is half-open, ((t_from, k_from), (t_to, k_to)); while active the
    per-step power is a free decision in [p_min, p_max].  fixed_profile, if
    given, is a non-adjustable base consumption added to the fixed load.
    """

    id: str
    window: tuple[tuple[int, int], tuple[int, int]]
    total_energy_MWh: float
    p_min: float = 0.0
    p_max: float = float("inf")
    fixed_profile: Profile | None = None

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise ValidationError(
                f"load '{self.id}': need 0 <= p_min <= p_max")
        if self.total_energy_MWh < 0:
            raise ValidationError(f"load '{self.id}': total energy must be >= 0")

    def window_slice(self, grid: TimeGrid) -> tuple[int, int]:
        """Flat [start, stop) indices of the window; raises if out of grid."""
        (t0, k0), (t1, k1) = self.window
        i0 = grid.flat(t0, k0)
        i1 = grid.n_steps if (t1, k1) == (grid.hours + 1, 1) else grid.flat(t1, k1)
        if i1 <= i0:
            raise ValidationError(
                f"load '{self.id}': empty or inverted window {self.window}")
        return i0, i1


@dataclass(frozen=True)
class MicrogridModel:
    """Everything inside the microgrid fence plus its grid connection."""

    units: tuple[DispatchableUnit, ...]
    renewables: tuple[NondispatchableUnit, ...]
    storages: tuple[Storage, ...]
    adjustable_loads: tuple[AdjustableLoad, ...]
    fixed_load: Profile
    exchange_capacity: float

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "renewables", tuple(self.renewables))
        object.__setattr__(self, "storages", tuple(self.storages))
        object.__setattr__(self, "adjustable_loads", tuple(self.adjustable_loads))
        ids = ([u.id for u in self.units] + [r.id for r in self.renewables]
               + [s.id for s in self.storages] + [a.id for a in self.adjustable_loads])
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate device ids: {sorted(ids)}")
        if not self.exchange_capacity > 0:
            raise ValidationError("exchange_capacity must be > 0")
        for r in self.renewables:
            if r.trace.grid != self.grid:
                raise GridMismatchError(f"renewable '{r.id}' trace grid differs")
        for a in self.adjustable_loads:
            if a.fixed_profile is not None and a.fixed_profile.grid != self.grid:
                raise GridMismatchError(f"load '{a.id}' fixed profile grid differs")

    @property
    def grid(self) -> TimeGrid:
        return self.fixed_load.grid


# ---------------------------------------------------------------------------
# schedule (extraction result)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CostBreakdown:
    """Operating cost split; purchase/sale are the scenario-weighted energy
    exchange terms, both reported as nonnegative numbers."""

    generation: float
    no_load: float
    startup: float
    purchase: float
    sale: float

    @property
    def total(self) -> float:
        return self.generation + self.no_load + self.startup + self.purchase - self.sale


@dataclass(frozen=True)
class ScenarioDispatch:
    """All continuous decisions of one scenario, as dense per-step arrays."""

    scenario_id: str
    probability: float
    unit_output: dict[str, np.ndarray]        # MW per step
    storage_charge: dict[str, np.ndarray]     # MW per step
    storage_discharge: dict[str, np.ndarray]
    storage_energy: dict[str, np.ndarray]     # MWh at end of step
    adjustable: dict[str, np.ndarray]         # MW per step, zero outside window
    exchange: Profile                         # MW per step, import > 0


@dataclass(frozen=True)
class Schedule:
    """Solved schedule: shared commitment plus per-scenario dispatch."""

    grid: TimeGrid
    mode: str
    commitment: dict[str, np.ndarray]   # unit id -> (hours,) 0/1 ints
    startup: dict[str, np.ndarray]      # unit id -> (hours,) 0/1 ints, 0->1 edges
    dispatch: dict[str, ScenarioDispatch]
    cost: CostBreakdown
    objective: float                    # solver objective (equals cost.total)
    gap: float
    base_id: str

    @property
    def base(self) -> ScenarioDispatch:
        return self.dispatch[self.base_id]


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------

def _validate_inputs(model: MicrogridModel, grid: TimeGrid, prices: Profile,
                     scenarios: ScenarioSet, mode: str,
                     envelope: ExchangeEnvelope | None):
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got '{mode}'")
    if model.grid != grid:
        raise GridMismatchError(f"model grid {model.grid} != requested grid {grid}")
    if prices.grid != grid:
        raise GridMismatchError("price profile grid differs from model grid")
    if scenarios.grid != grid:
        raise GridMismatchError("scenario grid differs from model grid")
    if (envelope is not None) != (mode == FLEXIBILITY_ORIENTED):
        raise ValidationError(
            "an envelope is required exactly when mode is flexibility_oriented")
    h = grid.step_hours
    for a in model.adjustable_loads:
        i0, i1 = a.window_slice(grid)
        span = (i1 - i0) * h
        if a.total_energy_MWh > a.p_max * span + 1e-9:
            raise ModelBuildError(
                f"load '{a.id}': {a.total_energy_MWh} MWh cannot fit in its window "
                f"({a.p_max} MW for {span} h)")
        if a.total_energy_MWh < a.p_min * span - 1e-9:
            raise ModelBuildError(
                f"load '{a.id}': window forces at least {a.p_min * span} MWh, "
                f"more than the required {a.total_energy_MWh}")


def _add_commitment(p: MilpProblem, model: MicrogridModel, T: int, index: dict):
    """Hourly commitment variables and min up/down logic, shared by scenarios."""
    index["commitment"] = {}
    index["startup"] = {}
    for u in model.units:
        uid = [p.add_variable(f"u[{u.id},{t}]", 0.0, 1.0,
                              objective=u.no_load_cost, integer=True)
               for t in range(1, T + 1)]
        index["commitment"][u.id] = uid

        simple = u.min_up == 1 and u.min_down == 1
        if simple and u.startup_cost == 0.0:
            index["startup"][u.id] = None
            continue
        sid = [p.add_variable(f"su[{u.id},{t}]", 0.0, 1.0, objective=u.startup_cost)
               for t in range(1, T + 1)]
        index["startup"][u.id] = sid
        if simple:
            # only the cost needs linking: su_t >= u_t - u_{t-1}, cold start u_0 = 0
            for t in range(T):
                prev = [(uid[t - 1], -1.0)] if t else []
                p.add_row([(uid[t], 1.0), (sid[t], -1.0)] + prev, "<=", 0.0,
                          f"start[{u.id},{t + 1}]")
            continue
        wid = [p.add_variable(f"sd[{u.id},{t}]", 0.0, 1.0) for t in range(1, T + 1)]
        for t in range(T):
            # u_t - u_{t-1} = su_t - sd_t
            prev = [(uid[t - 1], -1.0)] if t else []
            p.add_row([(uid[t], 1.0), (sid[t], -1.0), (wid[t], 1.0)] + prev,
                      "=", 0.0, f"edge[{u.id},{t + 1}]")
        for t in range(T):
            # a unit started inside the trailing window must still be up
            lo = max(0, t - u.min_up + 1)
            p.add_row([(sid[tau], 1.0) for tau in range(lo, t + 1)]
                      + [(uid[t], -1.0)], "<=", 0.0, f"minup[{u.id},{t + 1}]")
            # a unit stopped inside the trailing window must still be down
            lo = max(0, t - u.min_down + 1)
            p.add_row([(wid[tau], 1.0) for tau in range(lo, t + 1)]
                      + [(uid[t], 1.0)], "<=", 1.0, f"mindown[{u.id},{t + 1}]")


def _add_scenario(p: MilpProblem, model: MicrogridModel, grid: TimeGrid,
                  prices: Profile, sid: str, prob: float,
                  islanded: np.ndarray, index: dict):
    """All per-scenario dispatch variables and rows."""
    T, K, n = grid.hours, grid.steps_per_hour, grid.n_steps
    h = grid.step_hours
    commit = index["commitment"]

    ex = []
    for i in range(n):
        cap = 0.0 if islanded[i] else model.exchange_capacity
        t, k = grid.t_k(i)
        ex.append(p.add_variable(f"ex[{t},{k},{sid}]", -cap, cap,
                                 objective=prob * prices.values[i] * h))
    index["exchange"][sid] = ex

    power: dict[str, list[int]] = {}
    for u in model.units:
        pv = []
        for i in range(n):
            t, k = grid.t_k(i)
            pv.append(p.add_variable(f"p[{u.id},{t},{k},{sid}]", 0.0, u.p_max,
                                     objective=prob * u.marginal_cost * h))
        power[u.id] = pv
        uid = commit[u.id]
        for i in range(n):
            t = i // K
            p.add_row([(pv[i], 1.0), (uid[t], -u.p_max)], "<=", 0.0)
            if u.p_min > 0:
                p.add_row([(pv[i], 1.0), (uid[t], -u.p_min)], ">=", 0.0)
        # per-step ramps; rows that cannot bind are skipped
        if K > 1 and u.ramp_up < u.p_max - u.p_min:
            for i in range(1, n):
                if i % K:
                    p.add_row([(pv[i], 1.0), (pv[i - 1], -1.0)], "<=", u.ramp_up)
        if K > 1 and u.ramp_down < u.p_max - u.p_min:
            for i in range(1, n):
                if i % K:
                    p.add_row([(pv[i], 1.0), (pv[i - 1], -1.0)], ">=", -u.ramp_down)
        # hour boundaries: commitment may flip.  With SU = max(p_min, ramp_up),
        # p(t,1) - p(t-1,K) <= ramp_up*u_{t-1} + SU*(1 - u_{t-1}) lets a fresh
        # start jump to p_min while a running unit stays ramp-limited.
        start_lvl = max(u.p_min, u.ramp_up)
        if start_lvl < u.p_max:
            for t in range(1, T):
                i = t * K  # first step of 0-based hour t
                p.add_row([(pv[i], 1.0), (pv[i - 1], -1.0),
                           (commit[u.id][t - 1], start_lvl - u.ramp_up)],
                          "<=", start_lvl)
        stop_lvl = max(u.p_min, u.ramp_down)
        if stop_lvl < u.p_max:
            for t in range(1, T):
                i = t * K
                p.add_row([(pv[i - 1], 1.0), (pv[i], -1.0),
                           (commit[u.id][t], stop_lvl - u.ramp_down)],
                          "<=", stop_lvl)
    index["unit_power"][sid] = power

    sto: dict[str, dict[str, list[int]]] = {}
    for s in model.storages:
        ch = [p.add_variable(f"ch[{s.id},{i}][{sid}]", 0.0, s.charge_max)
              for i in range(n)]
        dis = [p.add_variable(f"dis[{s.id},{i}][{sid}]", 0.0, s.discharge_max)
               for i in range(n)]
        en = []
        for i in range(n):
            lo = s.e_min_MWh
            if i == n - 1:
                lo = max(lo, s.terminal_min)
            en.append(p.add_variable(f"en[{s.id},{i}][{sid}]", lo, s.capacity_MWh))
        for i in range(n):
            # E_i = E_{i-1} + (eta_c*ch - dis/eta_d) * h
            prev = [(en[i - 1], -1.0)] if i else []
            rhs = 0.0 if i else s.initial_energy_MWh
            p.add_row([(en[i], 1.0), (ch[i], -s.eta_charge * h),
                       (dis[i], h / s.eta_discharge)] + prev, "=", rhs)
        if s.needs_exclusivity:
            for i in range(n):
                y = p.add_variable(f"y[{s.id},{i}][{sid}]", 0.0, 1.0, integer=True)
                p.add_row([(ch[i], 1.0), (y, -s.charge_max)], "<=", 0.0)
                p.add_row([(dis[i], 1.0), (y, s.discharge_max)], "<=", s.discharge_max)
        sto[s.id] = {"charge": ch, "discharge": dis, "energy": en}
    index["storage"][sid] = sto

    adj: dict[str, dict] = {}
    for a in model.adjustable_loads:
        i0, i1 = a.window_slice(grid)
        av = [p.add_variable(f"adj[{a.id},{i}][{sid}]", a.p_min, a.p_max)
              for i in range(i0, i1)]
        p.add_row([(v, h) for v in av], "=", a.total_energy_MWh, f"energy[{a.id},{sid}]")
        adj[a.id] = {"start": i0, "ids": av}
    index["adjustable"][sid] = adj

    base_demand = model.fixed_load.values.copy()
    for a in model.adjustable_loads:
        if a.fixed_profile is not None:
            base_demand = base_demand + a.fixed_profile.values
    for r in model.renewables:
        base_demand = base_demand - r.trace.values
    for i in range(n):
        coeffs = [(power[u.id][i], 1.0) for u in model.units]
        for s in model.storages:
            coeffs.append((sto[s.id]["discharge"][i], 1.0))
            coeffs.append((sto[s.id]["charge"][i], -1.0))
        coeffs.append((ex[i], 1.0))
        for a in model.adjustable_loads:
            entry = adj[a.id]
            if entry["start"] <= i < entry["start"] + len(entry["ids"]):
                coeffs.append((entry["ids"][i - entry["start"]], -1.0))
        t, k = grid.t_k(i)
        p.add_row(coeffs, "=", float(base_demand[i]), f"balance[{t},{k},{sid}]")


def build_problem(model: MicrogridModel, grid: TimeGrid, prices: Profile,
                  scenarios: ScenarioSet, mode: str = PRICE_BASED,
                  envelope: ExchangeEnvelope | None = None) -> MilpProblem:
    """Assemble the scheduling MILP.

    The returned problem carries a variable index in ``problem.metadata``
    ("schedule_index") that extract_schedule and flexibility_constraints use
    to find their variables.
    """
    _validate_inputs(model, grid, prices, scenarios, mode, envelope)
    p = MilpProblem(f"schedule-{mode}")
    index: dict = {
        "grid": (grid.hours, grid.steps_per_hour),
        "mode": mode,
        "base_id": scenarios.base.id,
        "scenario_ids": [s.id for s in scenarios.scenarios],
        "probabilities": {s.id: s.probability for s in scenarios.scenarios},
        "islanded": {s.id: s.window_mask(grid).astype(int).tolist()
                     for s in scenarios.scenarios},
        "exchange": {}, "unit_power": {}, "storage": {}, "adjustable": {},
    }
    _add_commitment(p, model, grid.hours, index)
    for s in scenarios.scenarios:
        _add_scenario(p, model, grid, prices, s.id, s.probability,
                      s.window_mask(grid), index)
    p.metadata["schedule_index"] = index
    if mode == FLEXIBILITY_ORIENTED:
        flexibility_constraints(p, envelope)
    return p


def flexibility_constraints(problem: MilpProblem,
                            envelope: ExchangeEnvelope) -> MilpProblem:
    """Add the exchange-difference rows implied by the envelope.

    For every step i >= 1 with a finite bound, constrains
    exchange(i) - exchange(i-1) per scenario.  Steps whose pair touches an
    islanding window are skipped: the feeder ramp there is not defined by the
    exchange (it is zero throughout the window anyway).  Unbounded entries add
    no rows, so an all-unbounded envelope leaves the problem unchanged.
    """
    index = problem.metadata.get("schedule_index")
    if index is None:
        raise ValidationError("problem was not built by build_problem")
    T, K = index["grid"]
    if (envelope.grid.hours, envelope.grid.steps_per_hour) != (T, K):
        raise GridMismatchError(
            f"envelope grid {envelope.grid} does not match problem grid ({T}, {K})")
    for sid in index["scenario_ids"]:
        if sid not in envelope.bounds:
            raise ValidationError(f"envelope has no bounds for scenario '{sid}'")
        lo = envelope.lower(sid)
        hi = envelope.upper(sid)
        ex = index["exchange"][sid]
        islanded = index["islanded"][sid]
        for i in range(1, envelope.grid.n_steps):
            if islanded[i] or islanded[i - 1]:
                continue
            pair = [(ex[i], 1.0), (ex[i - 1], -1.0)]
            if np.isfinite(hi[i]):
                problem.add_row(pair, "<=", float(hi[i]), f"flexhi[{i},{sid}]")
            if np.isfinite(lo[i]):
                problem.add_row(pair, ">=", float(lo[i]), f"flexlo[{i},{sid}]")
    return problem


# ---------------------------------------------------------------------------
# schedule extraction
# ---------------------------------------------------------------------------

def _series(x: np.ndarray, ids: list[int]) -> np.ndarray:
    return x[np.asarray(ids, dtype=int)]


def extract_schedule(problem: MilpProblem, solution: MilpSolution) -> Schedule:
    """Map a solver result back to named schedule series.

    The cost breakdown is recomputed from the extracted series and must agree
    with the solver objective to COST_TOL relative, otherwise the extraction
    is wrong somewhere and an IntegrityError is raised.
    """
    if solution.x is None or solution.status in ("infeasible", "unbounded"):
        raise SolveError(solution.status,
                         f"no schedule to extract: {solution.message or solution.status}")
    index = problem.metadata.get("schedule_index")
    if index is None:
        raise ValidationError("problem was not built by build_problem")
    T, K = index["grid"]
    grid = TimeGrid(T, K)
    x = solution.x

    commitment: dict[str, np.ndarray] = {}
    startup: dict[str, np.ndarray] = {}
    for uid, ids in index["commitment"].items():
        raw = _series(x, ids)
        if np.max(np.abs(raw - np.round(raw))) > INT_TOL:
            raise IntegrityError(f"commitment of '{uid}' is not integral: {raw}")
        u = np.round(raw).astype(int)
        commitment[uid] = u
        prev = np.concatenate([[0], u[:-1]])  # cold start
        startup[uid] = ((u == 1) & (prev == 0)).astype(int)

    dispatch: dict[str, ScenarioDispatch] = {}
    for sid in index["scenario_ids"]:
        unit_output = {uid: _series(x, ids)
                       for uid, ids in index["unit_power"][sid].items()}
        charge, discharge, energy = {}, {}, {}
        for stid, d in index["storage"][sid].items():
            charge[stid] = _series(x, d["charge"])
            discharge[stid] = _series(x, d["discharge"])
            energy[stid] = _series(x, d["energy"])
        adjustable = {}
        for lid, d in index["adjustable"][sid].items():
            full = np.zeros(grid.n_steps)
            full[d["start"]:d["start"] + len(d["ids"])] = _series(x, d["ids"])
            adjustable[lid] = full
        exchange = Profile(grid, _series(x, index["exchange"][sid]))
        dispatch[sid] = ScenarioDispatch(
            scenario_id=sid, probability=index["probabilities"][sid],
            unit_output=unit_output, storage_charge=charge,
            storage_discharge=discharge, storage_energy=energy,
            adjustable=adjustable, exchange=exchange)

    cost = _recompute_cost(problem, index, commitment, startup, dispatch)
    if abs(cost.total - solution.objective) > COST_TOL * (1 + abs(solution.objective)):
        raise IntegrityError(
            f"recomputed cost {cost.total} disagrees with solver objective "
            f"{solution.objective}")
    return Schedule(grid=grid, mode=index["mode"], commitment=commitment,
                    startup=startup, dispatch=dispatch, cost=cost,
                    objective=float(solution.objective), gap=float(solution.gap),
                    base_id=index["base_id"])


def _recompute_cost(problem: MilpProblem, index: dict,
                    commitment: dict[str, np.ndarray],
                    startup: dict[str, np.ndarray],
                    dispatch: dict[str, ScenarioDispatch]) -> CostBreakdown:
    """Rebuild the cost breakdown from series using the per-variable objective
    coefficients stored in the problem (the price/marginal data lives there)."""
    arrays = problem.snapshot()
    no_load = 0.0
    start = 0.0
    for uid, ids in index["commitment"].items():
        per_hour = arrays.c[ids[0]]
        no_load += float(per_hour * commitment[uid].sum())
        sids = index["startup"][uid]
        if sids is not None:
            per_start = arrays.c[sids[0]]
            start += float(per_start * startup[uid].sum())
    generation = 0.0
    purchase = 0.0
    sale = 0.0
    for sid, disp in dispatch.items():
        for uid, series in disp.unit_output.items():
            coefs = arrays.c[np.asarray(index["unit_power"][sid][uid])]
            generation += float(coefs @ series)
        price_coefs = arrays.c[np.asarray(index["exchange"][sid])]
        ex = disp.exchange.values
        purchase += float(price_coefs @ np.maximum(ex, 0.0))
        sale += float(-(price_coefs @ np.minimum(ex, 0.0)))
    return CostBreakdown(generation=generation, no_load=no_load, startup=start,
                         purchase=purchase, sale=sale)


def operation_cost(schedule: Schedule, prices: Profile) -> float:
    """Scenario-weighted operating cost of a schedule at the given prices.

    Local generation cost (marginal-equivalent is not recoverable from the
    schedule alone, so the stored breakdown's generation/no-load/startup terms
    are reused) plus the energy-exchange term recomputed against ``prices``;
    export revenue enters negatively.
    """
    if prices.grid != schedule.grid:
        raise GridMismatchError("price grid differs from schedule grid")
    h = schedule.grid.step_hours
    exchange_cost = 0.0
    for disp in schedule.dispatch.values():
        exchange_cost += disp.probability * float(
            prices.values @ disp.exchange.values) * h
    return (schedule.cost.generation + schedule.cost.no_load
            + schedule.cost.startup + exchange_cost)


# ---------------------------------------------------------------------------
# independent physics verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleCheck:
    """Residuals from re-checking a schedule against its model from scratch."""

    balance_residual: float        # MW, worst over all (t, k, s)
    storage_residual: float        # MWh, worst recursion defect
    storage_bound_violation: float # MWh, worst excursion outside [e_min, cap]
    islanded_exchange: float       # MW, worst |exchange| inside a window
    commitment_violation: float    # MW, worst output outside [p_min*u, p_max*u]
    adjustable_residual: float     # MWh, worst window-energy defect
    min_up_down_ok: bool

    def ok(self, balance_tol: float = 1e-6, energy_tol: float = 1e-9,
           exchange_tol: float = 1e-9, power_tol: float = 1e-6) -> bool:
        return (self.balance_residual <= balance_tol
                and self.storage_residual <= energy_tol
                and self.storage_bound_violation <= energy_tol
                and self.islanded_exchange <= exchange_tol
                and self.commitment_violation <= power_tol
                and self.adjustable_residual <= balance_tol
                and self.min_up_down_ok)


def _runs(series: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal constant runs of a 0/1 series as (value, start, length)."""
    out = []
    start = 0
    for i in range(1, len(series) + 1):
        if i == len(series) or series[i] != series[start]:
            out.append((int(series[start]), start, i - start))
            start = i
    return out


def _min_updown_ok(u: np.ndarray, min_up: int, min_down: int) -> bool:
    """Scan the hourly 0/1 series; runs truncated by the horizon end are fine,
    and the initial off period carries no obligation (cold start)."""
    T = len(u)
    for value, start, length in _runs(u):
        if start + length == T:
            continue
        if value == 1 and length < min_up:
            return False
        if value == 0 and start > 0 and length < min_down:
            return False
    return True


def verify_schedule(model: MicrogridModel, schedule: Schedule,
                    scenarios: ScenarioSet) -> ScheduleCheck:
    """Re-check schedule physics directly from the model, without the solver.

    Covers power balance, the storage energy recursion and bounds, zero
    exchange inside islanding windows, output-vs-commitment consistency, the
    adjustable-load energy totals, and the min up/down scan.
    """
    grid = schedule.grid
    h = grid.step_hours
    K = grid.steps_per_hour
    balance_res = 0.0
    storage_res = 0.0
    storage_bounds = 0.0
    islanded_ex = 0.0
    commit_viol = 0.0
    adj_res = 0.0

    base_demand = model.fixed_load.values.copy()
    for a in model.adjustable_loads:
        if a.fixed_profile is not None:
            base_demand = base_demand + a.fixed_profile.values
    renew = np.zeros(grid.n_steps)
    for r in model.renewables:
        renew = renew + r.trace.values

    by_scenario = {s.id: s for s in scenarios.scenarios}
    for sid, disp in schedule.dispatch.items():
        supply = renew + disp.exchange.values.copy()
        for series in disp.unit_output.values():
            supply = supply + series
        for stid in disp.storage_discharge:
            supply = supply + disp.storage_discharge[stid] - disp.storage_charge[stid]
        demand = base_demand.copy()
        for series in disp.adjustable.values():
            demand = demand + series
        balance_res = max(balance_res, float(np.max(np.abs(supply - demand),
                                                    initial=0.0)))

        for s in model.storages:
            ch = disp.storage_charge[s.id]
            dis = disp.storage_discharge[s.id]
            en = disp.storage_energy[s.id]
            prev = np.concatenate([[s.initial_energy_MWh], en[:-1]])
            defect = en - prev - (s.eta_charge * ch - dis / s.eta_discharge) * h
            storage_res = max(storage_res, float(np.max(np.abs(defect))))
            storage_bounds = max(
                storage_bounds,
                float(np.max(s.e_min_MWh - en, initial=0.0)),
                float(np.max(en - s.capacity_MWh, initial=0.0)),
                float(s.terminal_min - en[-1]) if en[-1] < s.terminal_min else 0.0)

        mask = by_scenario[sid].window_mask(grid)
        if mask.any():
            islanded_ex = max(islanded_ex,
                              float(np.max(np.abs(disp.exchange.values[mask]))))

        for u in model.units:
            on = np.repeat(schedule.commitment[u.id], K).astype(float)
            pw = disp.unit_output[u.id]
            commit_viol = max(
                commit_viol,
                float(np.max(pw - u.p_max * on, initial=0.0)),
                float(np.max(u.p_min * on - pw, initial=0.0)))

        for a in model.adjustable_loads:
            i0, i1 = a.window_slice(grid)
            got = float(disp.adjustable[a.id][i0:i1].sum() * h)
            adj_res = max(adj_res, abs(got - a.total_energy_MWh))

    min_ok = all(_min_updown_ok(schedule.commitment[u.id], u.min_up, u.min_down)
                 for u in model.units)
    return ScheduleCheck(balance_residual=balance_res, storage_residual=storage_res,
                         storage_bound_violation=storage_bounds,
                         islanded_exchange=islanded_ex,
                         commitment_violation=commit_viol,
                         adjustable_residual=adj_res, min_up_down_ok=min_ok)
