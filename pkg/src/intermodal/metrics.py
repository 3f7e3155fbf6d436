"""Scenario-level quantities: average travel time, time-based modal shares and
rebalancing totals."""

from __future__ import annotations

import dataclasses
from typing import Any

import numpy as np

from .config import CongestionModel
from .congestion import road_times
from .graph import ArcKind, Supergraph
from .ingest import DemandSet
from .model import LpProblem
from .solve import FlowSolution

MODES = ("walking", "micromobility", "amod")
_MODE_KIND = {"walking": ArcKind.WALK, "micromobility": ArcKind.MICRO, "amod": ArcKind.ROAD}


@dataclasses.dataclass(frozen=True)
class ScenarioMetrics:
    t_avg: float
    share_walking: float
    share_micromobility: float
    share_amod: float
    amod_rebalancing_total: float
    micro_rebalancing_total: float
    objective: float
    total_demand: float

    @property
    def modal_share(self) -> tuple[float, float, float]:
        return (self.share_walking, self.share_micromobility, self.share_amod)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


CSV_FIELDS = tuple(f.name for f in dataclasses.fields(ScenarioMetrics))


def arc_times(sol: FlowSolution, g: Supergraph, congestion: CongestionModel = CongestionModel.THRESHOLD) -> np.ndarray:
    """Per-arc travel times the metrics use.

    Free-flow everywhere in threshold mode; in piecewise-BPR mode road arcs
    are charged the exact BPR time at their solved total (user + empty) flow.
    """
    t = np.array(g.time, dtype=float)
    if congestion == CongestionModel.PIECEWISE_BPR:
        road = g.arcs_of(ArcKind.ROAD)
        x_road = sol.aggregate_flow[road] + sol.rebalancing_flow
        t[road] = road_times(g.time[road], g.capacity[road], x_road)
    return t


def average_travel_time(sol: FlowSolution, g: Supergraph, d: DemandSet,
                        congestion: CongestionModel = CongestionModel.THRESHOLD) -> float:
    """Total user time (switching included) per unit of demand."""
    total = d.total_rate
    if not total > 0:
        raise ValueError("average travel time is undefined for zero total demand")
    return float(arc_times(sol, g, congestion) @ sol.aggregate_flow) / total


def modal_share_time(sol: FlowSolution, g: Supergraph,
                     congestion: CongestionModel = CongestionModel.THRESHOLD) -> tuple[float, float, float]:
    """Fractions of in-vehicle and walking time spent per mode.

    Switching time is left out of numerator and denominator alike, so the
    three shares add up to one.
    """
    weighted = arc_times(sol, g, congestion) * sol.aggregate_flow
    per_mode = np.array([weighted[g.kind == _MODE_KIND[m]].sum() for m in MODES])
    denom = per_mode.sum()
    if not denom > 0:
        raise ValueError("modal share is undefined without any user flow")
    shares = per_mode / denom
    return tuple(float(s) for s in shares)


def rebalancing_totals(sol: FlowSolution, g: Supergraph | None = None,
                       time_weighted: bool = False) -> tuple[float, float]:
    """(AMoD empty-vehicle flow summed over road arcs, micromobility feed rate).

    With ``time_weighted`` the AMoD figure becomes empty vehicle-hours per
    hour, which needs the graph for the arc times.
    """
    if time_weighted:
        if g is None:
            raise ValueError("time-weighted totals need the supergraph")
        amod = float(g.time[g.arcs_of(ArcKind.ROAD)] @ sol.rebalancing_flow)
    else:
        amod = float(np.sum(sol.rebalancing_flow))
    return amod, float(np.sum(sol.beta_in))


def scenario_metrics(sol: FlowSolution, lp: LpProblem, d: DemandSet) -> ScenarioMetrics:
    g, congestion = lp.graph, lp.config.congestion_model
    walking, micro, amod = modal_share_time(sol, g, congestion)
    reb_amod, reb_micro = rebalancing_totals(sol)
    return ScenarioMetrics(
        t_avg=average_travel_time(sol, g, d, congestion),
        share_walking=walking,
        share_micromobility=micro,
        share_amod=amod,
        amod_rebalancing_total=reb_amod,
        micro_rebalancing_total=reb_micro,
        objective=sol.objective,
        total_demand=d.total_rate,
    )
