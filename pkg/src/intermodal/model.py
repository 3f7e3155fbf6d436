"""Sparse LP assembly for the joint AMoD / micromobility routing problem.

Columns, in order:

* user flow of every commodity on every arc (``M * E`` columns, commodity-major);
  road and micromobility user flows double as the vehicle flows that carry
  them, so no separate vehicle columns exist;
* empty AMoD rebalancing flow on every road arc;
* micromobility feed (``beta_in``) and withdraw (``beta_out``) rates per
  micromobility node;
* one total-latency epigraph column per road arc (piecewise-BPR mode only).

Equality rows: user conservation per (commodity, node), AMoD vehicle balance
per road node, micromobility vehicle balance per micromobility node, and the
global feed = withdraw balance. Inequality rows: rebalancing budget, the two
fleet budgets, road capacities, switching capacities, per-node rebalancing
caps, and the tangent cuts. Rows whose right-hand side is infinite are kept
so that row counts do not depend on parameter values; the solver skips them.
"""

from __future__ import annotations

import dataclasses
import math
from collections import defaultdict
from typing import Sequence

import numpy as np
from scipy import sparse

from .config import CongestionModel, ScenarioConfig
from .congestion import BprParams, linearize_total_latency
from .errors import ConfigError
from .graph import ArcKind, Layer, Supergraph
from .ingest import DemandSet


@dataclasses.dataclass(frozen=True)
class Commodity:
    """Flow from one origin to one or more destinations (dense node indices)."""

    origin: int
    destinations: tuple[int, ...]
    rates: tuple[float, ...]

    @property
    def rate(self) -> float:
        return float(sum(self.rates))


def per_request_commodities(g: Supergraph, d: DemandSet) -> list[Commodity]:
    return [Commodity(g.index(r.origin), (g.index(r.destination),), (r.rate,)) for r in d.requests]


def aggregate_commodities(g: Supergraph, d: DemandSet) -> list[Commodity]:
    """Group requests by origin: one commodity per distinct origin.

    Conservation is linear in the flows, so summing the per-request flows of
    a shared origin gives a feasible aggregated flow with the same cost, and
    any aggregated flow decomposes back into per-destination paths.
    """
    groups: dict[int, dict[int, float]] = defaultdict(dict)
    for r in d.requests:
        o, t = g.index(r.origin), g.index(r.destination)
        groups[o][t] = groups[o].get(t, 0.0) + r.rate
    return [
        Commodity(o, tuple(sorted(sinks)), tuple(sinks[t] for t in sorted(sinks)))
        for o, sinks in sorted(groups.items())
    ]


@dataclasses.dataclass(frozen=True)
class VariableIndex:
    M: int
    E: int
    road_arcs: np.ndarray
    micro_nodes: np.ndarray
    has_epigraph: bool

    @property
    def E_R(self) -> int:
        return len(self.road_arcs)

    @property
    def N_M(self) -> int:
        return len(self.micro_nodes)

    @property
    def rebalancing_offset(self) -> int:
        return self.M * self.E

    @property
    def beta_in_offset(self) -> int:
        return self.rebalancing_offset + self.E_R

    @property
    def beta_out_offset(self) -> int:
        return self.beta_in_offset + self.N_M

    @property
    def epigraph_offset(self) -> int:
        return self.beta_out_offset + self.N_M

    @property
    def n_cols(self) -> int:
        return self.epigraph_offset + (self.E_R if self.has_epigraph else 0)

    def user(self, m, arc):
        return np.asarray(m) * self.E + np.asarray(arc)

    def rebalancing(self, r):
        """Column of the rebalancing flow on the r-th road arc."""
        return self.rebalancing_offset + np.asarray(r)

    def beta_in(self, j):
        """Column of the feed rate at the j-th micromobility node."""
        return self.beta_in_offset + np.asarray(j)

    def beta_out(self, j):
        return self.beta_out_offset + np.asarray(j)

    def epigraph(self, r):
        if not self.has_epigraph:
            raise KeyError("no epigraph columns outside piecewise-BPR mode")
        return self.epigraph_offset + np.asarray(r)

    # slices for unpacking a solution vector
    @property
    def user_slice(self) -> slice:
        return slice(0, self.M * self.E)

    @property
    def rebalancing_slice(self) -> slice:
        return slice(self.rebalancing_offset, self.beta_in_offset)

    @property
    def beta_in_slice(self) -> slice:
        return slice(self.beta_in_offset, self.beta_out_offset)

    @property
    def beta_out_slice(self) -> slice:
        return slice(self.beta_out_offset, self.epigraph_offset)

    @property
    def epigraph_slice(self) -> slice:
        return slice(self.epigraph_offset, self.n_cols)


@dataclasses.dataclass
class LpProblem:
    """``min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub``."""

    c: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    eq_rows: dict[str, slice]
    ub_rows: dict[str, slice]
    index: VariableIndex
    graph: Supergraph
    commodities: list[Commodity]
    config: ScenarioConfig

    @property
    def shape(self) -> tuple[int, int, int]:
        """(equality rows, inequality rows, columns)."""
        return self.A_eq.shape[0], self.A_ub.shape[0], len(self.c)

    def commodity_rates(self) -> np.ndarray:
        return np.array([c.rate for c in self.commodities])


class _Rows:
    """COO accumulator for one block of constraint rows."""

    def __init__(self) -> None:
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.rhs: list[np.ndarray] = []
        self.families: dict[str, slice] = {}
        self.n = 0

    def add(self, name: str, n_rows: int, rows, cols, vals, rhs) -> None:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        self.rows.append(rows + self.n)
        self.cols.append(cols)
        self.vals.append(np.array(vals))
        self.rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (n_rows,)).copy())
        self.families[name] = slice(self.n, self.n + n_rows)
        self.n += n_rows

    def build(self, n_cols: int) -> tuple[sparse.csr_matrix, np.ndarray]:
        if not self.rows:
            return sparse.csr_matrix((0, n_cols)), np.zeros(0)
        A = sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n, n_cols),
        ).tocsr()
        A.sum_duplicates()
        return A, np.concatenate(self.rhs)


def _all_commodity_cols(idx: VariableIndex, arcs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(commodity id, column) for every commodity on every arc in ``arcs``."""
    m = np.repeat(np.arange(idx.M), len(arcs))
    a = np.tile(arcs, idx.M)
    return m, idx.user(m, a)


def build_lp(g: Supergraph, d: DemandSet, cfg: ScenarioConfig,
             commodities: Sequence[Commodity] | None = None) -> LpProblem:
    """Assemble the joint routing LP for demand ``d`` on supergraph ``g``."""
    if commodities is None:
        commodities = (aggregate_commodities(g, d) if cfg.aggregate_commodities
                       else per_request_commodities(g, d))
    commodities = list(commodities)
    if not commodities:
        raise ConfigError("demand set is empty")
    pwl = cfg.congestion_model == CongestionModel.PIECEWISE_BPR

    N, E = g.N, g.E
    road = g.arcs_of(ArcKind.ROAD)
    micro = g.arcs_of(ArcKind.MICRO)
    switch = g.arcs_of(ArcKind.SWITCH)
    road_nodes = g.layer_nodes(Layer.ROAD)
    micro_nodes = g.layer_nodes(Layer.MICROMOBILITY)
    idx = VariableIndex(len(commodities), E, road, micro_nodes, pwl)
    M, E_R, N_M = idx.M, idx.E_R, idx.N_M
    n_cols = idx.n_cols

    if not pwl and not np.all(np.isfinite(g.capacity[road])):
        raise ConfigError("threshold congestion needs a finite capacity on every road arc")

    eq = _Rows()
    ub = _Rows()

    # user flow conservation: inflow - outflow = rate in at d, -rate out at o
    m_all, cols_all = _all_commodity_cols(idx, np.arange(E))
    a_all = np.tile(np.arange(E), M)
    rhs = np.zeros(M * N)
    for m, com in enumerate(commodities):
        rhs[m * N + com.origin] -= com.rate
        for t, rate in zip(com.destinations, com.rates):
            rhs[m * N + t] += rate
    eq.add(
        "user_conservation", M * N,
        np.concatenate([m_all * N + g.head[a_all], m_all * N + g.tail[a_all]]),
        np.concatenate([cols_all, cols_all]),
        np.concatenate([np.ones(len(cols_all)), -np.ones(len(cols_all))]),
        rhs,
    )

    # AMoD vehicle balance per road node (carried users + empty rebalancing)
    road_off = road_nodes[0] if len(road_nodes) else 0
    m_r, cols_r = _all_commodity_cols(idx, road)
    a_r = np.tile(road, M)
    reb = idx.rebalancing(np.arange(E_R))
    heads = np.concatenate([g.head[a_r], g.head[road]]) - road_off
    tails = np.concatenate([g.tail[a_r], g.tail[road]]) - road_off
    cols = np.concatenate([cols_r, reb])
    eq.add(
        "amod_balance", len(road_nodes),
        np.concatenate([heads, tails]), np.concatenate([cols, cols]),
        np.concatenate([np.ones(len(cols)), -np.ones(len(cols))]), 0.0,
    )

    # micromobility vehicle balance per node: in + feed = out + withdraw
    micro_off = micro_nodes[0] if len(micro_nodes) else 0
    m_b, cols_b = _all_commodity_cols(idx, micro)
    a_b = np.tile(micro, M)
    local = np.arange(N_M)
    eq.add(
        "micro_balance", N_M,
        np.concatenate([g.head[a_b] - micro_off, g.tail[a_b] - micro_off, local, local]),
        np.concatenate([cols_b, cols_b, idx.beta_in(local), idx.beta_out(local)]),
        np.concatenate([np.ones(len(cols_b)), -np.ones(len(cols_b)), np.ones(N_M), -np.ones(N_M)]),
        0.0,
    )

    # total feed equals total withdraw
    eq.add(
        "rebalancing_balance", 1,
        np.zeros(2 * N_M), np.concatenate([idx.beta_in(local), idx.beta_out(local)]),
        np.concatenate([np.ones(N_M), -np.ones(N_M)]), 0.0,
    )

    ub.add("rebalancing_total", 1, np.zeros(N_M), idx.beta_in(local), 1.0, cfg.beta_total)

    # fleet budgets in vehicle-hours per hour
    t_road = np.tile(g.time[road], M)
    if cfg.include_rebalancing_in_fleet:
        ub.add("amod_fleet", 1, np.zeros(len(cols_r) + E_R), np.concatenate([cols_r, reb]),
               np.concatenate([t_road, g.time[road]]), cfg.n_R)
    else:
        ub.add("amod_fleet", 1, np.zeros(len(cols_r)), cols_r, t_road, cfg.n_R)
    ub.add("micro_fleet", 1, np.zeros(len(cols_b)), cols_b, np.tile(g.time[micro], M), cfg.n_M)

    road_local = np.tile(np.arange(E_R), M)
    if not pwl or cfg.pwl_keep_capacity:
        ub.add("road_capacity", E_R,
               np.concatenate([road_local, np.arange(E_R)]), np.concatenate([cols_r, reb]),
               1.0, g.capacity[road])

    E_S = len(switch)
    _, cols_s = _all_commodity_cols(idx, switch)
    ub.add("switch_capacity", E_S, np.tile(np.arange(E_S), M), cols_s, 1.0, g.capacity[switch])

    ub.add("beta_node_cap", 2 * N_M, np.arange(2 * N_M),
           np.concatenate([idx.beta_in(local), idx.beta_out(local)]), 1.0, cfg.beta_node)

    c = np.zeros(n_cols)
    c[idx.user_slice] = np.tile(g.time, M)
    if pwl:
        c[cols_r] = 0.0
        c[idx.epigraph(np.arange(E_R))] = 1.0
        K = int(cfg.pwl_segments)
        rows, cols, vals, rhs = [], [], [], []
        for r, a in enumerate(road):
            p = BprParams(g.time[a], g.capacity[a])
            for k, seg in enumerate(linearize_total_latency(p, K, cfg.pwl_xmax_factor * p.h)):
                row = r * K + k
                arc_cols = np.concatenate([idx.user(np.arange(M), a), [idx.rebalancing(r)]])
                rows.append(np.full(len(arc_cols) + 1, row))
                cols.append(np.concatenate([arc_cols, [idx.epigraph(r)]]))
                vals.append(np.concatenate([np.full(len(arc_cols), seg.slope), [-1.0]]))
                rhs.append(-seg.intercept)
        ub.add("latency_cuts", E_R * K, np.concatenate(rows), np.concatenate(cols),
               np.concatenate(vals), np.array(rhs))

    A_eq, b_eq = eq.build(n_cols)
    A_ub, b_ub = ub.build(n_cols)
    lb = np.zeros(n_cols)
    upper = np.full(n_cols, np.inf)
    if cfg.beta_nodes is not None:
        allowed = np.zeros(N_M, dtype=bool)
        allowed[[k - 1 for k in cfg.beta_nodes if 0 < k <= N_M]] = True
        upper[idx.beta_in(local[~allowed])] = 0.0
        upper[idx.beta_out(local[~allowed])] = 0.0
    return LpProblem(c, A_eq, b_eq, A_ub, b_ub, lb, upper, eq.families, ub.families,
                     idx, g, commodities, cfg)


def expected_shape(g: Supergraph, M: int, cfg: ScenarioConfig) -> tuple[int, int, int]:
    """Closed-form (equality rows, inequality rows, columns) for ``build_lp``."""
    N, E = g.N, g.E
    N_R, N_M = g.node_count(Layer.ROAD), g.node_count(Layer.MICROMOBILITY)
    E_R, E_S = g.arc_count(ArcKind.ROAD), g.arc_count(ArcKind.SWITCH)
    pwl = cfg.congestion_model == CongestionModel.PIECEWISE_BPR
    n_eq = M * N + N_R + N_M + 1
    n_ub = 1 + 2 + E_S + 2 * N_M
    if not pwl or cfg.pwl_keep_capacity:
        n_ub += E_R
    if pwl:
        n_ub += E_R * int(cfg.pwl_segments)
    n_cols = M * E + E_R + 2 * N_M + (E_R if pwl else 0)
    return n_eq, n_ub, n_cols


def _column_names(idx: VariableIndex) -> list[str]:
    names = [f"x_{m}_{a}" for m in range(idx.M) for a in range(idx.E)]
    names += [f"r_{k}" for k in range(idx.E_R)]
    names += [f"bin_{j}" for j in range(idx.N_M)]
    names += [f"bout_{j}" for j in range(idx.N_M)]
    if idx.has_epigraph:
        names += [f"z_{k}" for k in range(idx.E_R)]
    return names


def _lp_terms(coeffs: np.ndarray, cols: np.ndarray, names: list[str]) -> str:
    parts = []
    for v, j in zip(coeffs, cols):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(float(v))!r} {names[j]}")
    text = " ".join(parts) if parts else "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def to_lp_format(lp: LpProblem) -> str:
    """Write the problem in CPLEX LP text format (infinite-rhs rows omitted)."""
    names = _column_names(lp.index)
    nz = np.flatnonzero(lp.c)
    out = ["\\ joint AMoD / micromobility routing LP", "Minimize", " obj: " + _lp_terms(lp.c[nz], nz, names),
           "Subject To"]
    for block, A, b, sense in (("e", lp.A_eq, lp.b_eq, "="), ("u", lp.A_ub, lp.b_ub, "<=")):
        for i in range(A.shape[0]):
            if not math.isfinite(b[i]):
                continue
            row = A.getrow(i)
            out.append(f" {block}{i}: {_lp_terms(row.data, row.indices, names)} {sense} {float(b[i])!r}")
    fixed = np.flatnonzero(lp.ub == 0)
    if len(fixed):
        out.append("Bounds")
        out += [f" {names[j]} = 0" for j in fixed]
    out.append("End")
    return "\n".join(out) + "\n"
