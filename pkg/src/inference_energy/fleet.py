"""Fleet-scale daily energy from per-query samples.

Node-level estimates understate a real fleet: load follows a daily cycle
(nodes idle part of the time), spare nodes are kept for redundancy, and
the interconnect draws power of its own. ``compute_beta`` folds these into
one multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass

HOURS_PER_DAY = 24
WH_PER_GWH = 1e9


@dataclass(frozen=True)
class BetaComponents:
    # the daily load swings 50-100%; only its mean enters the algebra
    mean_utilization: float = 0.75
    p_max_kw: float = 11.3
    p_idle_kw: float = 2.7
    redundancy_factor: float = 1.10
    interconnect_factor: float = 1.12

    def __post_init__(self):
        if not 0 < self.mean_utilization <= 1:
            raise ValueError(f"mean_utilization must lie in (0, 1], got {self.mean_utilization}")
        if not 0 <= self.p_idle_kw < self.p_max_kw:
            raise ValueError("need 0 <= p_idle_kw < p_max_kw")
        if self.redundancy_factor < 1 or self.interconnect_factor < 1:
            raise ValueError("redundancy and interconnect factors must be >= 1")


@dataclass(frozen=True)
class BetaBreakdown:
    e_uniform_kwh: float
    e_sin_kwh: float
    beta_util: float
    beta: float


def beta_breakdown(c: BetaComponents) -> BetaBreakdown:
    """Daily node energies (kWh/day) and the resulting factors."""
    e_uniform = c.p_max_kw * HOURS_PER_DAY
    e_sin = c.p_idle_kw * HOURS_PER_DAY + (c.p_max_kw - c.p_idle_kw) * HOURS_PER_DAY * c.mean_utilization
    beta_util = (1 / c.mean_utilization) * (e_sin / e_uniform)
    return BetaBreakdown(e_uniform, e_sin, beta_util, c.redundancy_factor * beta_util * c.interconnect_factor)


def compute_beta(c: BetaComponents | None = None) -> float:
    return beta_breakdown(c or BetaComponents()).beta


def daily_energy(mean_energy_per_query_wh: float, queries_per_day: float, beta: float) -> float:
    """Total GWh/day."""
    return mean_energy_per_query_wh * queries_per_day * beta / WH_PER_GWH


@dataclass(frozen=True)
class FleetSpec:
    queries_per_day: float = 1e9
    beta: float | None = None
    components: BetaComponents = BetaComponents()

    def __post_init__(self):
        if self.queries_per_day < 1:
            raise ValueError("queries_per_day must be >= 1")
        if self.beta is not None and self.beta < 1:
            raise ValueError("beta must be >= 1")

    @property
    def effective_beta(self) -> float:
        return self.beta if self.beta is not None else compute_beta(self.components)


@dataclass(frozen=True)
class FleetReport:
    scenario: str
    mean_wh_per_query: float
    queries_per_day: float
    beta: float
    gwh_per_day: float


def fleet_report(scenario: str, mean_wh_per_query: float, fleet: FleetSpec) -> FleetReport:
    beta = fleet.effective_beta
    return FleetReport(scenario, mean_wh_per_query, fleet.queries_per_day, beta,
                       daily_energy(mean_wh_per_query, fleet.queries_per_day, beta))
