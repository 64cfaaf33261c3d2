"""Feeder-level ramp algebra: time grids, power profiles, and the exchange envelope.

The distribution feeder net load seen by the utility is the microgrid's grid
exchange plus the aggregated net load of the other prosumers/consumers on the
feeder.  The grid operator caps how fast that feeder net load may move between
consecutive intra-hour steps (delta1, MW per step) and across hour boundaries
(delta2, MW).  Substituting the aggregation into those two ramp caps turns them
into time-varying bounds on the *microgrid exchange* step differences -- the
exchange envelope -- which is what the scheduler can actually enforce.

Sign convention: exchange > 0 means the microgrid imports from the grid.
All types here are immutable and every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ValidationError

#: Sentinel for "this ramp limit is not enforced".
UNBOUNDED = float("inf")

#: Slack absorbed before a ramp excess counts as a violation (MW).
RAMP_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Two-level time index: ``hours`` inter-hour periods, each split into
    ``steps_per_hour`` intra-hour steps.

    Steps are addressed as (t, k) with t in 1..hours and k in 1..steps_per_hour,
    or by flat 0-based index.  ``steps_per_hour`` must divide 60 so steps align
    with whole minutes.
    """

    hours: int
    steps_per_hour: int

    def __post_init__(self):
        if self.hours < 1:
            raise ValidationError(f"hours must be >= 1, got {self.hours}")
        if not 1 <= self.steps_per_hour <= 60:
            raise ValidationError(
                f"steps_per_hour must be in [1, 60], got {self.steps_per_hour}")
        if 60 % self.steps_per_hour != 0:
            raise ValidationError(
                f"steps_per_hour must divide 60, got {self.steps_per_hour}")

    @property
    def step_minutes(self) -> int:
        return 60 // self.steps_per_hour

    @property
    def step_hours(self) -> float:
        """Duration of one intra-hour step in hours (used for MW -> MWh)."""
        return 1.0 / self.steps_per_hour

    @property
    def n_steps(self) -> int:
        return self.hours * self.steps_per_hour

    def flat(self, t: int, k: int) -> int:
        """Flat 0-based index of step (t, k); t and k are 1-based."""
        if not 1 <= t <= self.hours:
            raise ValidationError(f"t={t} outside 1..{self.hours}")
        if not 1 <= k <= self.steps_per_hour:
            raise ValidationError(f"k={k} outside 1..{self.steps_per_hour}")
        return (t - 1) * self.steps_per_hour + (k - 1)

    def t_k(self, i: int) -> tuple[int, int]:
        """Inverse of :meth:`flat`."""
        if not 0 <= i < self.n_steps:
            raise ValidationError(f"flat index {i} outside 0..{self.n_steps - 1}")
        return i // self.steps_per_hour + 1, i % self.steps_per_hour + 1

    def minute_of_day(self, i: int) -> int:
        return i * self.step_minutes


@dataclass(frozen=True)
class Profile:
    """A per-(t, k) power series in MW, dense over the whole grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.n_steps:
            raise ValidationError(
                f"profile has {v.shape} values, grid needs ({self.grid.n_steps},)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("profile values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def value(self, t: int, k: int = 1) -> float:
        return float(self.values[self.grid.flat(t, k)])

    def step_diffs(self) -> np.ndarray:
        """Differences values[i] - values[i-1] for i = 1..n-1.

        Index i is an intra-hour pair when i % steps_per_hour != 0, otherwise an
        hour boundary.
        """
        return np.diff(self.values)

    @classmethod
    def constant(cls, grid: TimeGrid, level: float) -> "Profile":
        return cls(grid, np.full(grid.n_steps, float(level)))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "Profile":
        return cls.constant(grid, 0.0)


@dataclass(frozen=True)
class ProsumerSet:
    """Net-load profiles of the non-microgrid prosumers/consumers on the feeder.

    May be empty; the grid is carried explicitly so an empty set still
    aggregates to a well-defined all-zero profile.
    """

    grid: TimeGrid
    members: tuple[tuple[str, Profile], ...] = ()

    def __post_init__(self):
        members = tuple(self.members)
        ids = [m[0] for m in members]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate prosumer ids: {sorted(ids)}")
        for pid, prof in members:
            if prof.grid != self.grid:
                raise GridMismatchError(
                    f"prosumer '{pid}' uses grid {prof.grid}, set uses {self.grid}")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def aggregate(self) -> Profile:
        """Sum of all member net loads (MW per step)."""
        total = np.zeros(self.grid.n_steps)
        for _, prof in self.members:
            total += prof.values
        return Profile(self.grid, total)


@dataclass(frozen=True)
class FlexibilityLimits:
    """Operator-chosen feeder ramp caps.

    delta1 bounds the feeder net-load change between consecutive intra-hour
    steps (MW per step); delta2 bounds the change across hour boundaries, last
    step of one hour to first step of the next (MW).  ``UNBOUNDED`` disables a
    cap entirely.
    """

    delta1: float = UNBOUNDED
    delta2: float = UNBOUNDED

    def __post_init__(self):
        for name, v in (("delta1", self.delta1), ("delta2", self.delta2)):
            if math.isnan(v) or v < 0:
                raise ValidationError(f"{name} must be >= 0 or UNBOUNDED, got {v}")

    @classmethod
    def unbounded(cls) -> "FlexibilityLimits":
        return cls(UNBOUNDED, UNBOUNDED)

    @property
    def intra_bounded(self) -> bool:
        return math.isfinite(self.delta1)

    @property
    def inter_bounded(self) -> bool:
        return math.isfinite(self.delta2)


@dataclass(frozen=True)
class Scenario:
    """One islanding scenario: during each window the microgrid is disconnected
    and its exchange is forced to zero.

    Windows are half-open (t, k) ranges: ((t_from, k_from), (t_to, k_to))
    covers flat indices [flat(from), flat(to)).
    """

    id: str
    islanding_windows: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    probability: float = 1.0

    @property
    def is_grid_connected(self) -> bool:
        return len(self.islanding_windows) == 0

    def window_mask(self, grid: TimeGrid) -> np.ndarray:
        """Boolean mask over flat steps, True where the scenario is islanded."""
        mask = np.zeros(grid.n_steps, dtype=bool)
        for (t0, k0), (t1, k1) in self.islanding_windows:
            i0 = grid.flat(t0, k0)
            # the end point is exclusive and may be one past the horizon
            i1 = grid.n_steps if (t1, k1) == (grid.hours + 1, 1) else grid.flat(t1, k1)
            if i1 <= i0:
                raise ValidationError(
                    f"scenario '{self.id}': empty or inverted window "
                    f"({t0},{k0})..({t1},{k1})")
            mask[i0:i1] = True
        return mask


@dataclass(frozen=True)
class ScenarioSet:
    """All islanding scenarios considered by one scheduling run.

    Must contain the grid-connected base scenario (no windows); probabilities
    sum to one.
    """

    grid: TimeGrid
    scenarios: tuple[Scenario, ...] = field(default_factory=lambda: (Scenario("base"),))

    def __post_init__(self):
        scen = tuple(self.scenarios)
        if not scen:
            raise ValidationError("scenario set may not be empty")
        ids = [s.id for s in scen]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate scenario ids: {sorted(ids)}")
        for s in scen:
            if not 0.0 <= s.probability <= 1.0:
                raise ValidationError(
                    f"scenario '{s.id}' probability {s.probability} outside [0, 1]")
            s.window_mask(self.grid)  # bounds-check the windows
        total = sum(s.probability for s in scen)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"scenario probabilities sum to {total}, need 1")
        if not any(s.is_grid_connected for s in scen):
            raise ValidationError("scenario set must include a grid-connected base scenario")
        object.__setattr__(self, "scenarios", scen)

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def base(self) -> Scenario:
        return next(s for s in self.scenarios if s.is_grid_connected)

    @classmethod
    def base_only(cls, grid: TimeGrid) -> "ScenarioSet":
        return cls(grid, (Scenario("base"),))


@dataclass(frozen=True)
class ExchangeEnvelope:
    """Per-step bounds on the microgrid exchange differences, one pair of
    arrays per scenario.

    ``lower[i]``/``upper[i]`` bound exchange(step i) - exchange(step i-1) for
    i >= 1; index 0 is unconstrained (+-inf).  Infinite entries mean the cap is
    not enforced at that step.  The prosumer aggregate does not depend on the
    scenario, so all scenarios carry identical bounds.
    """

    grid: TimeGrid
    bounds: dict[str, tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        for sid, (lo, hi) in self.bounds.items():
            if lo.shape != (self.grid.n_steps,) or hi.shape != (self.grid.n_steps,):
                raise ValidationError(f"envelope arrays for '{sid}' have wrong length")
            both = np.isfinite(lo) & np.isfinite(hi)
            if np.any(lo[both] > hi[both] + 1e-12):
                raise ValidationError(f"envelope for '{sid}' has lower > upper")

    def scenario_ids(self) -> list[str]:
        return list(self.bounds.keys())

    def lower(self, scenario_id: str) -> np.ndarray:
        return self.bounds[scenario_id][0]

    def upper(self, scenario_id: str) -> np.ndarray:
        return self.bounds[scenario_id][1]

    def is_unbounded(self) -> bool:
        """True when no entry constrains anything."""
        return all(
            not np.any(np.isfinite(lo)) and not np.any(np.isfinite(hi))
            for lo, hi in self.bounds.values())


def aggregate_feeder(exchange: Profile, prosumers: ProsumerSet) -> Profile:
    """Feeder net load: microgrid exchange plus the summed prosumer net loads."""
    if exchange.grid != prosumers.grid:
        raise GridMismatchError(
            f"exchange grid {exchange.grid} != prosumer grid {prosumers.grid}")
    return Profile(exchange.grid, exchange.values + prosumers.aggregate().values)


def intra_hour_violations(
        feeder: Profile, limits: FlexibilityLimits) -> list[tuple[int, int, float]]:
    """Steps where the feeder intra-hour ramp exceeds delta1.

    Returns one (t, k, excess_MW) per step with k != 1 whose |difference to the
    previous step| exceeds delta1 by more than RAMP_TOL.  Empty when
    steps_per_hour == 1 or delta1 is unbounded.
    """
    if not limits.intra_bounded or feeder.grid.steps_per_hour < 2:
        return []
    diffs = feeder.step_diffs()
    k_of = np.arange(1, feeder.grid.n_steps) % feeder.grid.steps_per_hour
    out = []
    for i in np.nonzero(k_of != 0)[0]:
        excess = abs(diffs[i]) - limits.delta1
        if excess > RAMP_TOL:
            t, k = feeder.grid.t_k(i + 1)
            out.append((t, k, float(excess)))
    return out


def inter_hour_violations(
        feeder: Profile, limits: FlexibilityLimits) -> list[tuple[int, float]]:
    """Hour boundaries where the feeder ramp exceeds delta2.

    Returns one (t, excess_MW) per hour t != 1 whose first step differs from
    the last step of hour t-1 by more than delta2 (+ RAMP_TOL).
    """
    if not limits.inter_bounded or feeder.grid.hours < 2:
        return []
    diffs = feeder.step_diffs()
    out = []
    for i in range(feeder.grid.steps_per_hour - 1, feeder.grid.n_steps - 1,
                   feeder.grid.steps_per_hour):
        excess = abs(diffs[i]) - limits.delta2
        if excess > RAMP_TOL:
            t, _ = feeder.grid.t_k(i + 1)
            out.append((t, float(excess)))
    return out


def exchange_envelope(
        prosumers: ProsumerSet,
        limits: FlexibilityLimits,
        scenarios: ScenarioSet) -> ExchangeEnvelope:
    """Convert the feeder ramp caps into bounds on exchange step differences.

    With d(i) the prosumer-aggregate difference at step i, the feeder cap
    |exchange diff + d| <= delta becomes

        -delta - d(i)  <=  exchange(i) - exchange(i-1)  <=  delta - d(i)

    using delta1 at intra-hour steps and delta2 at hour boundaries.  Unbounded
    limits produce +-inf entries.  Bounds are replicated per scenario.
    """
    if prosumers.grid != scenarios.grid:
        raise GridMismatchError(
            f"prosumer grid {prosumers.grid} != scenario grid {scenarios.grid}")
    grid = prosumers.grid
    n = grid.n_steps
    d = np.zeros(n)
    d[1:] = prosumers.aggregate().step_diffs()

    K = grid.steps_per_hour
    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[K::K] = True

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    idx = np.arange(1, n)
    intra = idx[~is_boundary[1:]]
    inter = idx[is_boundary[1:]]
    if limits.intra_bounded:
        lower[intra] = -limits.delta1 - d[intra]
        upper[intra] = limits.delta1 - d[intra]
    if limits.inter_bounded:
        lower[inter] = -limits.delta2 - d[inter]
        upper[inter] = limits.delta2 - d[inter]
    lower.setflags(write=False)
    upper.setflags(write=False)

    bounds = {s.id: (lower, upper) for s in scenarios.scenarios}
    return ExchangeEnvelope(grid, bounds)
