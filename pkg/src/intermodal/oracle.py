"""Reference values computed without the LP.

With every capacity, fleet and rebalancing limit out of the way, the routing
problem separates per commodity into shortest paths over free-flow times.
Rebalancing is free in the objective and the supergraph is strongly
connected, so vehicle balance can always be restored without changing the
cost; the LP optimum then equals the demand-weighted shortest-path total.
"""

from __future__ import annotations

import dataclasses
import heapq
from typing import Iterable

import numpy as np

from .config import CongestionModel, ScenarioConfig
from .errors import UnreachableError
from .graph import Layer, LayeredNetwork, Supergraph
from .ingest import DemandSet

ALL_LAYERS = frozenset(Layer)


def _allowed_arcs(g: Supergraph, mode_mask: Iterable[Layer]) -> np.ndarray:
    layers = [int(Layer(m)) for m in mode_mask]
    node_layer = np.empty(g.N, dtype=np.int64)
    for layer in Layer:
        node_layer[g.layer_nodes(layer)] = layer
    return np.isin(node_layer[g.tail], layers) & np.isin(node_layer[g.head], layers)


def shortest_time(g: Supergraph, source, mode_mask: Iterable[Layer] = ALL_LAYERS) -> np.ndarray:
    """Label-setting (Dijkstra) free-flow times from ``source`` to every node.

    Only arcs whose two endpoints lie in ``mode_mask`` layers are used, so a
    walking-only mask also excludes the switching arcs. Unreachable nodes get
    ``inf``.
    """
    s = g.index(source) if isinstance(source, tuple) else int(source)
    allowed = _allowed_arcs(g, mode_mask)
    adj: list[list[tuple[int, float]]] = [[] for _ in range(g.N)]
    for a in np.flatnonzero(allowed):
        adj[g.tail[a]].append((int(g.head[a]), float(g.time[a])))

    dist = np.full(g.N, np.inf)
    dist[s] = 0.0
    done = np.zeros(g.N, dtype=bool)
    heap = [(0.0, s)]
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def request_times(g: Supergraph, d: DemandSet, mode_mask: Iterable[Layer] = ALL_LAYERS) -> np.ndarray:
    """Shortest free-flow time of every request, in request order."""
    mode_mask = frozenset(mode_mask)
    cache: dict[int, np.ndarray] = {}
    out = np.empty(len(d))
    for i, r in enumerate(d.requests):
        o = g.index(r.origin)
        if o not in cache:
            cache[o] = shortest_time(g, o, mode_mask)
        t = cache[o][g.index(r.destination)]
        if not np.isfinite(t):
            raise UnreachableError(f"{r.destination!r} is unreachable from {r.origin!r} "
                                   f"using layers {sorted(m.name for m in mode_mask)}")
        out[i] = t
    return out


def uncapacitated_optimum(g: Supergraph, d: DemandSet, mode_mask: Iterable[Layer] = ALL_LAYERS) -> float:
    """Sum over requests of rate times shortest free-flow time."""
    rates = np.array([r.rate for r in d.requests])
    return float(rates @ request_times(g, d, mode_mask))


def walking_only_optimum(g: Supergraph, d: DemandSet) -> float:
    return uncapacitated_optimum(g, d, {Layer.WALKING})


def relaxed_graph(g: Supergraph, limit: float = 1e9) -> Supergraph:
    """Copy of ``g`` with every road and switching capacity set to ``limit``."""
    layers = list(g.layers)
    road = layers[Layer.ROAD]
    layers[Layer.ROAD] = LayeredNetwork(
        Layer.ROAD, road.node_count, [dataclasses.replace(a, capacity=limit) for a in road.arcs]
    )
    return Supergraph(layers, [dataclasses.replace(a, capacity=limit) for a in g.switch_arcs])


def relaxed_config(cfg: ScenarioConfig, limit: float = 1e9) -> ScenarioConfig:
    """Threshold-mode copy of ``cfg`` with fleets and rebalancing caps at ``limit``."""
    return cfg.replace(n_R=limit, n_M=limit, beta_node=limit, beta_total=limit, h_S=limit,
                       congestion_model=CongestionModel.THRESHOLD, beta_nodes=None)
