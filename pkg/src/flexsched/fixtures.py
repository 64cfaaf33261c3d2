"""Seeded synthetic cases for tests, benchmarks, and the shipped example.

The default case mirrors a small campus-style microgrid: four dispatchable
units spanning baseload to fast peaker, solar and wind traces, one storage,
five adjustable loads, and a handful of noisy feeder prosumers.  All series
are generated from a seeded RNG, so a given (steps_per_hour, seed) pair is
fully reproducible.  The parameter values are synthetic; they are shaped for
interesting scheduling behavior, not taken from any measured system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (FlexibilityLimits, Profile, ProsumerSet, Scenario,
                   ScenarioSet, TimeGrid, UNBOUNDED)
from .scheduling import (AdjustableLoad, DispatchableUnit, MicrogridModel,
                         NondispatchableUnit, Storage)

DEFAULT_SEED = 2016


@dataclass(frozen=True)
class Case:
    """A complete scheduling case: model, market, scenarios, and feeder side."""

    name: str
    grid: TimeGrid
    model: MicrogridModel
    prices: Profile
    scenarios: ScenarioSet
    prosumers: ProsumerSet
    limits: FlexibilityLimits
    seed: int


def _ar1(rng: np.random.Generator, n: int, sigma: float, phi: float = 0.6) -> np.ndarray:
    """Mean-reverting noise; step-to-step moves are O(sigma)."""
    x = np.zeros(n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + sigma * rng.standard_normal()
    return x


def _hour_curve(grid: TimeGrid, hourly: np.ndarray) -> np.ndarray:
    """Repeat an (hours,) array across the intra-hour steps."""
    return np.repeat(np.asarray(hourly, dtype=float), grid.steps_per_hour)


def _hours_axis(grid: TimeGrid) -> np.ndarray:
    """Fractional hour of day at each step midpoint."""
    return (np.arange(grid.n_steps) + 0.5) * grid.step_hours


def default_case(steps_per_hour: int = 6, seed: int = DEFAULT_SEED) -> Case:
    """The repository's standard 24 h case (grid-connected base scenario only).

    Prosumer net loads carry strong intra-hour noise, so holding the feeder
    ramp at delta1 = 0 forces the microgrid to counter-move its exchange every
    step; absorbing that internally is priced by ramp-limited cheap units, a
    bounded storage, and expensive fast peakers.
    """
    grid = TimeGrid(24, steps_per_hour)
    rng = np.random.default_rng(seed)
    n = grid.n_steps
    hrs = _hours_axis(grid)

    solar_shape = np.maximum(0.0, np.sin((hrs - 6.0) / 12.0 * np.pi))
    solar = np.clip(4.2 * solar_shape ** 1.5 + _ar1(rng, n, 0.25)
                    * (solar_shape > 0), 0.0, None)
    wind = np.clip(1.9 + _ar1(rng, n, 0.45), 0.0, 3.6)

    load = (6.8
            + 2.2 * np.exp(-0.5 * ((hrs - 9.0) / 2.2) ** 2)
            + 3.0 * np.exp(-0.5 * ((hrs - 19.0) / 2.6) ** 2)
            + _ar1(rng, n, 0.30))
    load = np.clip(load, 3.0, None)

    hourly_price = np.array([28, 27, 26, 26, 27, 30, 38, 52, 64, 58, 50, 46,
                             44, 45, 48, 55, 68, 84, 92, 88, 72, 55, 40, 32],
                            dtype=float)
    prices = Profile(grid, _hour_curve(grid, hourly_price))

    units = (
        DispatchableUnit("g1", p_min=0.8, p_max=5.0, marginal_cost=32.0,
                         no_load_cost=20.0, startup_cost=80.0,
                         ramp_up=0.6, ramp_down=0.6, min_up=4, min_down=4),
        DispatchableUnit("g2", p_min=0.5, p_max=4.0, marginal_cost=48.0,
                         no_load_cost=15.0, startup_cost=60.0,
                         ramp_up=0.8, ramp_down=0.8, min_up=3, min_down=2),
        DispatchableUnit("g3", p_min=0.0, p_max=3.0, marginal_cost=70.0,
                         no_load_cost=8.0, startup_cost=40.0,
                         ramp_up=1.5, ramp_down=1.5),
        DispatchableUnit("g4", p_min=0.0, p_max=2.5, marginal_cost=95.0,
                         no_load_cost=5.0, startup_cost=25.0,
                         ramp_up=2.5, ramp_down=2.5),
    )
    renewables = (
        NondispatchableUnit("solar", Profile(grid, solar)),
        NondispatchableUnit("wind", Profile(grid, wind)),
    )
    # lossless round trip: the charge/discharge exclusivity binary is omitted
    # (see Storage), which keeps the default case at 96 binaries
    storages = (
        Storage("bess", capacity_MWh=6.0, e_min_MWh=0.6,
                charge_max=2.0, discharge_max=2.0,
                eta_charge=1.0, eta_discharge=1.0,
                initial_energy_MWh=3.0, terminal_min_MWh=3.0),
    )
    adjustable = (
        AdjustableLoad("ev_fleet", ((18, 1), (24, 1)), total_energy_MWh=6.0,
                       p_max=2.0),
        AdjustableLoad("heat_tank", ((1, 1), (7, 1)), total_energy_MWh=4.5,
                       p_max=1.5),
        AdjustableLoad("industrial", ((8, 1), (18, 1)), total_energy_MWh=7.0,
                       p_max=1.6),
        AdjustableLoad("pumping", ((10, 1), (17, 1)), total_energy_MWh=3.0,
                       p_max=1.2),
        AdjustableLoad("cold_store", ((12, 1), (23, 1)), total_energy_MWh=4.0,
                       p_max=1.0),
    )
    model = MicrogridModel(units=units, renewables=renewables, storages=storages,
                           adjustable_loads=adjustable,
                           fixed_load=Profile(grid, load),
                           exchange_capacity=12.0)

    members = []
    for j, (level, swing) in enumerate([(2.4, 0.85), (1.6, 0.70), (3.0, 0.60)]):
        base = level + 0.8 * np.sin((hrs - 14.0) / 24.0 * 2 * np.pi + j)
        net = base + _ar1(rng, n, swing, phi=0.5)
        members.append((f"prosumer_{j + 1}", Profile(grid, net)))
    prosumers = ProsumerSet(grid, tuple(members))

    return Case(name="default", grid=grid, model=model, prices=prices,
                scenarios=ScenarioSet.base_only(grid), prosumers=prosumers,
                limits=FlexibilityLimits(delta1=0.0, delta2=UNBOUNDED),
                seed=seed)


def islanding_case(seed: int = 7) -> Case:
    """Small 6 h case with one islanding scenario and a lossy storage.

    Sized so every constraint family is present (commitment with min up/down,
    exclusivity binaries, islanded steps) while staying cheap to solve.
    """
    grid = TimeGrid(6, 2)
    rng = np.random.default_rng(seed)
    n = grid.n_steps
    load = 4.0 + 1.2 * np.sin(np.linspace(0, np.pi, n)) + _ar1(rng, n, 0.15)
    pv = np.clip(1.0 + _ar1(rng, n, 0.2), 0.0, 2.0)

    units = (
        DispatchableUnit("d1", p_min=0.5, p_max=4.0, marginal_cost=35.0,
                         no_load_cost=10.0, startup_cost=30.0,
                         ramp_up=1.0, ramp_down=1.0, min_up=2, min_down=2),
        DispatchableUnit("d2", p_min=0.0, p_max=3.0, marginal_cost=80.0,
                         no_load_cost=4.0, startup_cost=15.0,
                         ramp_up=3.0, ramp_down=3.0),
    )
    storages = (
        Storage("cell", capacity_MWh=3.0, e_min_MWh=0.3,
                charge_max=1.5, discharge_max=1.5,
                eta_charge=0.9, eta_discharge=0.9,
                initial_energy_MWh=1.5, terminal_min_MWh=1.2),
    )
    adjustable = (
        AdjustableLoad("flex_load", ((2, 1), (6, 1)), total_energy_MWh=2.0,
                       p_max=1.0),
    )
    model = MicrogridModel(units=units,
                           renewables=(NondispatchableUnit("pv", Profile(grid, pv)),),
                           storages=storages, adjustable_loads=adjustable,
                           fixed_load=Profile(grid, load), exchange_capacity=6.0)

    scenarios = ScenarioSet(grid, (
        Scenario("base", (), 0.7),
        Scenario("island_mid", (((3, 1), (5, 1)),), 0.3),
    ))
    prosumers = ProsumerSet(grid, (
        ("p1", Profile(grid, 1.5 + _ar1(rng, n, 0.4, phi=0.45))),
    ))
    prices = Profile(grid, _hour_curve(grid, np.array([30, 42, 55, 70, 58, 38.0])))
    return Case(name="islanding", grid=grid, model=model, prices=prices,
                scenarios=scenarios, prosumers=prosumers,
                limits=FlexibilityLimits(delta1=0.2, delta2=1.0), seed=seed)
