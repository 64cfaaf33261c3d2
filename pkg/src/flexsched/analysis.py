"""Feeder-level analysis: ramp metrics, mode comparison, and limit selection.

Everything here works on already-solved Schedules plus the feeder-side data
(prosumer set and ramp limits).  The one exception is build_cost_curves, which
re-solves the scheduling problem once per candidate limit pair to price the
microgrid's flexibility premium.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (FlexibilityLimits, Profile, ProsumerSet, ScenarioSet,
                   TimeGrid, aggregate_feeder, exchange_envelope,
                   inter_hour_violations, intra_hour_violations)
from .errors import GridMismatchError, SolveError, ValidationError
from .milp import solve_milp
from .scheduling import (FLEXIBILITY_ORIENTED, PRICE_BASED, MicrogridModel,
                         Schedule, build_problem, extract_schedule,
                         operation_cost)


class RampMetrics(NamedTuple):
    """Magnitudes of the two feeder difference sequences (MW)."""

    max_intra: float
    max_inter: float
    mean_abs_intra: float
    mean_abs_inter: float


def ramp_metrics(feeder: Profile) -> RampMetrics:
    """Max and mean |difference| of a feeder series, split into intra-hour
    pairs and hour-boundary pairs.  Series of length 1 give all zeros."""
    grid = feeder.grid
    if grid.n_steps < 2:
        return RampMetrics(0.0, 0.0, 0.0, 0.0)
    diffs = np.abs(feeder.step_diffs())
    boundary = (np.arange(1, grid.n_steps) % grid.steps_per_hour) == 0
    intra = diffs[~boundary]
    inter = diffs[boundary]

    def stats(d: np.ndarray) -> tuple[float, float]:
        if d.size == 0:
            return 0.0, 0.0
        return float(d.max()), float(d.mean())

    max_intra, mean_intra = stats(intra)
    max_inter, mean_inter = stats(inter)
    return RampMetrics(max_intra, max_inter, mean_intra, mean_inter)


@dataclass(frozen=True)
class ModeRun:
    """One solved mode: the schedule plus the prices it was solved against."""

    schedule: Schedule
    prices: Profile


@dataclass(frozen=True)
class ModeMetrics:
    cost: float
    max_intra_MW: float
    max_inter_MW: float
    mean_abs_intra_MW: float
    mean_abs_inter_MW: float
    intra_violations: int
    inter_violations: int


@dataclass(frozen=True)
class ComparisonReport:
    """Price-based vs flexibility-oriented, on a common feeder."""

    limits: FlexibilityLimits
    price: ModeMetrics
    flex: ModeMetrics
    cost_delta: float                 # flex cost - price cost
    cost_increase_pct: float | None   # 100 * delta / price cost; None if price <= 0
    feeder_price: Profile             # base-scenario feeder net load per mode
    feeder_flex: Profile


def _mode_metrics(run: ModeRun, limits: FlexibilityLimits,
                  prosumers: ProsumerSet) -> tuple[ModeMetrics, Profile]:
    feeder = aggregate_feeder(run.schedule.base.exchange, prosumers)
    m = ramp_metrics(feeder)
    metrics = ModeMetrics(
        cost=operation_cost(run.schedule, run.prices),
        max_intra_MW=m.max_intra, max_inter_MW=m.max_inter,
        mean_abs_intra_MW=m.mean_abs_intra, mean_abs_inter_MW=m.mean_abs_inter,
        intra_violations=len(intra_hour_violations(feeder, limits)),
        inter_violations=len(inter_hour_violations(feeder, limits)))
    return metrics, feeder


def compare_modes(price_run: ModeRun, flex_run: ModeRun,
                  limits: FlexibilityLimits,
                  prosumers: ProsumerSet) -> ComparisonReport:
    """Compare the two scheduling modes on the same feeder.

    The feeder series use the base (grid-connected) scenario's exchange.
    Violation counts check each mode's feeder against ``limits`` with the same
    operations a caller would use directly.
    """
    g = price_run.schedule.grid
    for other in (flex_run.schedule.grid, price_run.prices.grid,
                  flex_run.prices.grid, prosumers.grid):
        if other != g:
            raise GridMismatchError("comparison inputs use different time grids")
    price_m, feeder_p = _mode_metrics(price_run, limits, prosumers)
    flex_m, feeder_f = _mode_metrics(flex_run, limits, prosumers)
    delta = flex_m.cost - price_m.cost
    pct = 100.0 * delta / price_m.cost if price_m.cost > 0 else None
    return ComparisonReport(limits=limits, price=price_m, flex=flex_m,
                            cost_delta=delta, cost_increase_pct=pct,
                            feeder_price=feeder_p, feeder_flex=feeder_f)


@dataclass(frozen=True)
class FlexCostCurves:
    """Sampled cost curves over a finite (delta1, delta2) candidate lattice.

    upgrade_cost[c] is the utility-side expense avoided when the microgrid
    holds the feeder to candidate c; payment[c] is the microgrid's scheduling
    cost increase for doing so.  Both nonnegative (infinite payment marks an
    infeasible candidate).
    """

    candidates: tuple[tuple[float, float], ...]
    upgrade_cost: dict[tuple[float, float], float]
    payment: dict[tuple[float, float], float]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        for c in self.candidates:
            if c not in self.upgrade_cost or c not in self.payment:
                raise ValidationError(f"candidate {c} missing from a curve")
            if self.upgrade_cost[c] < 0 or self.payment[c] < 0:
                raise ValidationError(f"candidate {c} has a negative expense")


def select_limits(curves: FlexCostCurves) -> tuple[float, float]:
    """Pick the candidate minimizing (microgrid payment - utility saving).

    Ties go to the loosest limits: largest delta1, then largest delta2, so an
    indifferent utility never buys more flexibility than it needs.
    """
    if not curves.candidates:
        raise ValidationError("candidate lattice is empty")
    return min(
        curves.candidates,
        key=lambda c: (curves.payment[c] - curves.upgrade_cost[c], -c[0], -c[1]))


def build_cost_curves(model: MicrogridModel, grid: TimeGrid, prices: Profile,
                      scenarios: ScenarioSet, prosumers: ProsumerSet,
                      candidates: list[tuple[float, float]],
                      upgrade_cost: dict[tuple[float, float], float],
                      baseline: Schedule | None = None,
                      rel_gap: float = 1e-4, node_limit: int = 100000,
                      time_limit_s: float | None = None) -> FlexCostCurves:
    """Price the microgrid payment for every candidate limit pair.

    Solves the price-based problem once (or reuses ``baseline``) and one
    flexibility-oriented problem per distinct candidate; repeated candidates
    hit a cache.  Infeasible candidates get payment = inf.
    """
    if baseline is None:
        base_problem = build_problem(model, grid, prices, scenarios, PRICE_BASED)
        base_sol = solve_milp(base_problem, rel_gap, node_limit, time_limit_s)
        if base_sol.x is None:
            raise SolveError(base_sol.status, "price-based baseline did not solve")
        baseline = extract_schedule(base_problem, base_sol)
    base_cost = baseline.cost.total

    payment: dict[tuple[float, float], float] = {}
    for cand in candidates:
        if cand in payment:
            continue
        limits = FlexibilityLimits(*cand)
        env = exchange_envelope(prosumers, limits, scenarios)
        problem = build_problem(model, grid, prices, scenarios,
                                FLEXIBILITY_ORIENTED, env)
        sol = solve_milp(problem, rel_gap, node_limit, time_limit_s)
        if sol.x is None:
            payment[cand] = float("inf")
        else:
            sched = extract_schedule(problem, sol)
            payment[cand] = max(0.0, sched.cost.total - base_cost)
    return FlexCostCurves(candidates=tuple(dict.fromkeys(candidates)),
                          upgrade_cost=dict(upgrade_cost), payment=payment)
