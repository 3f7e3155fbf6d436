"""Three-layer supergraph (walking, micromobility, road) with switching arcs.

Nodes are addressed either by :class:`NodeRef` (layer + local id) or by a
dense integer index into the supergraph. Arcs are stored in a fixed order:
walking arcs, then micromobility, then road, then switching arcs. Per-arc
attributes are also exposed as numpy arrays because the LP builder works on
whole arc families at once.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from collections import deque
from typing import NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .errors import GraphError


class Layer(enum.IntEnum):
    WALKING = 0
    MICROMOBILITY = 1
    ROAD = 2


class ArcKind(enum.IntEnum):
    WALK = 0
    MICRO = 1
    ROAD = 2
    SWITCH = 3


LAYER_ARC_KIND = {
    Layer.WALKING: ArcKind.WALK,
    Layer.MICROMOBILITY: ArcKind.MICRO,
    Layer.ROAD: ArcKind.ROAD,
}


class NodeRef(NamedTuple):
    layer: Layer
    local_id: int

    def __repr__(self) -> str:
        return f"{self.layer.name[0]}{self.local_id}"


def free_flow_time(length: float, speed: float) -> float:
    """Uncongested traversal time in hours for ``length`` km at ``speed`` km/h."""
    if not speed > 0:
        raise GraphError(f"speed must be positive, got {speed}")
    if length < 0:
        raise GraphError(f"length must be non-negative, got {length}")
    return length / speed


@dataclasses.dataclass(frozen=True)
class Arc:
    tail: NodeRef
    head: NodeRef
    kind: ArcKind
    length: float
    speed: float
    capacity: float
    free_flow_time: float

    def __post_init__(self) -> None:
        if self.tail == self.head:
            raise GraphError(f"self-loop arc at {self.tail!r}")
        crosses = self.tail.layer != self.head.layer
        if crosses != (self.kind == ArcKind.SWITCH):
            raise GraphError(f"arc {self.tail!r}->{self.head!r} has inconsistent kind {self.kind.name}")
        if crosses and Layer.WALKING not in (self.tail.layer, self.head.layer):
            raise GraphError("switching arcs must touch the walking layer")
        if not crosses and LAYER_ARC_KIND[self.tail.layer] != self.kind:
            raise GraphError(f"arc kind {self.kind.name} does not match layer {self.tail.layer.name}")
        if not self.capacity > 0:
            raise GraphError(f"arc capacity must be positive, got {self.capacity}")
        if self.free_flow_time < 0 or math.isnan(self.free_flow_time):
            raise GraphError("free-flow time must be non-negative")


def layer_arc(layer: Layer, tail: int, head: int, length: float, speed: float,
              capacity: float = math.inf) -> Arc:
    """Intra-layer arc with its free-flow time computed from length and speed."""
    return Arc(
        NodeRef(layer, tail), NodeRef(layer, head), LAYER_ARC_KIND[layer],
        float(length), float(speed), float(capacity), free_flow_time(length, speed),
    )


def switch_arc(tail: NodeRef, head: NodeRef, switching_time: float,
               capacity: float = math.inf) -> Arc:
    return Arc(tail, head, ArcKind.SWITCH, 0.0, math.nan, float(capacity), float(switching_time))


@dataclasses.dataclass(frozen=True)
class LayeredNetwork:
    layer: Layer
    node_count: int
    arcs: tuple[Arc, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "arcs", tuple(self.arcs))
        for arc in self.arcs:
            for end in (arc.tail, arc.head):
                if end.layer != self.layer or not 0 <= end.local_id < self.node_count:
                    raise GraphError(f"arc endpoint {end!r} outside layer {self.layer.name}")

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    def edge_list(self) -> tuple[np.ndarray, np.ndarray]:
        tails = np.fromiter((a.tail.local_id for a in self.arcs), dtype=np.int64, count=len(self.arcs))
        heads = np.fromiter((a.head.local_id for a in self.arcs), dtype=np.int64, count=len(self.arcs))
        return tails, heads


class Supergraph:
    """Union of the three layers plus switching arcs. Immutable after construction."""

    def __init__(self, layers: Sequence[LayeredNetwork], switch_arcs: Sequence[Arc]):
        layers = tuple(layers)
        if [net.layer for net in layers] != list(Layer):
            raise GraphError("supergraph needs exactly the walking, micromobility and road layers in order")
        self.layers: tuple[LayeredNetwork, ...] = layers
        self.switch_arcs: tuple[Arc, ...] = tuple(switch_arcs)
        for arc in self.switch_arcs:
            if arc.kind != ArcKind.SWITCH:
                raise GraphError("switch_arcs may only hold switching arcs")
            for end in (arc.tail, arc.head):
                if not 0 <= end.local_id < layers[end.layer].node_count:
                    raise GraphError(f"switching arc endpoint {end!r} does not exist")

        counts = [net.node_count for net in layers]
        self._node_offset = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.arcs: tuple[Arc, ...] = tuple(a for net in layers for a in net.arcs) + self.switch_arcs

        self.tail = np.array([self.index(a.tail) for a in self.arcs], dtype=np.int64)
        self.head = np.array([self.index(a.head) for a in self.arcs], dtype=np.int64)
        self.kind = np.array([a.kind for a in self.arcs], dtype=np.int64)
        self.time = np.array([a.free_flow_time for a in self.arcs], dtype=float)
        self.length = np.array([a.length for a in self.arcs], dtype=float)
        self.capacity = np.array([a.capacity for a in self.arcs], dtype=float)
        for arr in (self.tail, self.head, self.kind, self.time, self.length, self.capacity):
            arr.setflags(write=False)

        order = np.argsort(self.tail, kind="stable")
        self._out_ptr = np.searchsorted(self.tail[order], np.arange(self.N + 1))
        self._out_idx = order
        order = np.argsort(self.head, kind="stable")
        self._in_ptr = np.searchsorted(self.head[order], np.arange(self.N + 1))
        self._in_idx = order

    # sizes -------------------------------------------------------------
    @property
    def N(self) -> int:
        return int(self._node_offset[-1])

    @property
    def E(self) -> int:
        return len(self.arcs)

    def node_count(self, layer: Layer) -> int:
        return self.layers[layer].node_count

    def arc_count(self, kind: ArcKind) -> int:
        return int(np.count_nonzero(self.kind == kind))

    # indexing ----------------------------------------------------------
    def index(self, ref: NodeRef) -> int:
        layer, local = ref
        if not 0 <= local < self.layers[layer].node_count:
            raise GraphError(f"invalid node {ref!r}")
        return int(self._node_offset[layer] + local)

    def node_ref(self, index: int) -> NodeRef:
        if not 0 <= index < self.N:
            raise GraphError(f"invalid node index {index}")
        layer = int(np.searchsorted(self._node_offset, index, side="right") - 1)
        return NodeRef(Layer(layer), int(index - self._node_offset[layer]))

    def layer_nodes(self, layer: Layer) -> np.ndarray:
        """Dense indices of the nodes in ``layer``."""
        return np.arange(self._node_offset[layer], self._node_offset[layer + 1])

    def arcs_of(self, kind: ArcKind) -> np.ndarray:
        """Dense arc ids of the given kind, in arc order."""
        return np.flatnonzero(self.kind == kind)

    def _dense(self, node: NodeRef | int) -> int:
        if isinstance(node, tuple):
            return self.index(NodeRef(*node))
        if not 0 <= node < self.N:
            raise GraphError(f"invalid node index {node}")
        return int(node)

    def out_arcs(self, node: NodeRef | int) -> np.ndarray:
        j = self._dense(node)
        return self._out_idx[self._out_ptr[j]:self._out_ptr[j + 1]]

    def in_arcs(self, node: NodeRef | int) -> np.ndarray:
        j = self._dense(node)
        return self._in_idx[self._in_ptr[j]:self._in_ptr[j + 1]]

    def incidence_matrix(self, kinds: Sequence[ArcKind] | None = None) -> sparse.csr_matrix:
        """Signed N x E incidence matrix: -1 at the tail, +1 at the head.

        With ``kinds`` only the columns of those arc families are kept, which
        gives the per-layer and switching blocks.
        """
        cols = np.arange(self.E) if kinds is None else np.flatnonzero(np.isin(self.kind, list(kinds)))
        n = len(cols)
        rows = np.concatenate([self.tail[cols], self.head[cols]])
        data = np.concatenate([-np.ones(n), np.ones(n)])
        return sparse.csr_matrix((data, (rows, np.tile(np.arange(n), 2))), shape=(self.N, n))

    def __repr__(self) -> str:
        return (f"Supergraph(N={self.N}, E={self.E}, "
                f"E_S={self.arc_count(ArcKind.SWITCH)})")


@dataclasses.dataclass(frozen=True)
class Request:
    origin: NodeRef
    destination: NodeRef
    rate: float

    def __post_init__(self) -> None:
        if self.origin.layer != Layer.WALKING or self.destination.layer != Layer.WALKING:
            raise GraphError("requests must start and end on the walking layer")
        if self.origin == self.destination:
            raise GraphError(f"request origin equals destination ({self.origin!r})")
        if not self.rate > 0:
            raise GraphError(f"request rate must be positive, got {self.rate}")


class Connectivity(NamedTuple):
    connected: bool
    witness: tuple | None


def _reach(n: int, adj_ptr: np.ndarray, adj_idx: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj_idx[adj_ptr[u]:adj_ptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return seen


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(src, kind="stable")
    return np.searchsorted(src[order], np.arange(n + 1)), dst[order]


def check_strong_connectivity(g: Supergraph | LayeredNetwork) -> Connectivity:
    """Check that every node reaches every other node.

    On failure the witness is a pair ``(u, v)`` of :class:`NodeRef` such that
    no directed path leads from ``u`` to ``v``.
    """
    if isinstance(g, Supergraph):
        n, tails, heads, ref = g.N, g.tail, g.head, g.node_ref
    else:
        n = g.node_count
        tails, heads = g.edge_list()
        ref = lambda i: NodeRef(g.layer, int(i))  # noqa: E731
    if n <= 1:
        return Connectivity(True, None)
    forward = _reach(n, *_csr(n, tails, heads), 0)
    if not forward.all():
        return Connectivity(False, (ref(0), ref(int(np.flatnonzero(~forward)[0]))))
    backward = _reach(n, *_csr(n, heads, tails), 0)
    if not backward.all():
        return Connectivity(False, (ref(int(np.flatnonzero(~backward)[0])), ref(0)))
    return Connectivity(True, None)


def build_supergraph(road_net: LayeredNetwork, config) -> Supergraph:
    """Replicate the road topology into walking and micromobility layers and
    join co-located nodes with switching arcs.

    Walking and micromobility arcs are uncapacitated and use the configured
    layer speeds; road arcs keep their own speed and capacity. Every node in
    ``config.switch_nodes`` (1-based ids, default all) gets the four switching
    arcs W->M, M->W, W->R, R->W with capacity ``config.h_S``.
    """
    if road_net.layer != Layer.ROAD:
        raise GraphError("build_supergraph expects the road layer")
    for arc in road_net.arcs:
        if not arc.speed > 0:
            raise GraphError(f"road arc {arc.tail!r}->{arc.head!r} has non-positive speed {arc.speed}")
    ok, witness = check_strong_connectivity(road_net)
    if not ok:
        raise GraphError(f"road network is not strongly connected: no path {witness[0]!r} -> {witness[1]!r}")
    if not config.h_S > 0:
        raise GraphError("switching capacity h_S must be positive; restrict switch_nodes instead")

    n = road_net.node_count
    layers = []
    for layer, speed in ((Layer.WALKING, config.speed_walk), (Layer.MICROMOBILITY, config.speed_micro)):
        arcs = [layer_arc(layer, a.tail.local_id, a.head.local_id, a.length, speed) for a in road_net.arcs]
        layers.append(LayeredNetwork(layer, n, arcs))
    layers.append(road_net)

    if config.switch_nodes is None:
        switch_at = range(n)
    else:
        switch_at = sorted({k - 1 for k in config.switch_nodes})
        if any(not 0 <= k < n for k in switch_at):
            raise GraphError("switch_nodes contains ids outside the network")
    switches = []
    for k in switch_at:
        w = NodeRef(Layer.WALKING, k)
        for other in (Layer.MICROMOBILITY, Layer.ROAD):
            o = NodeRef(other, k)
            switches.append(switch_arc(w, o, config.switching_time, config.h_S))
            switches.append(switch_arc(o, w, config.switching_time, config.h_S))
    g = Supergraph(layers, switches)
    ok, witness = check_strong_connectivity(g)
    if not ok:
        raise GraphError(f"supergraph is not strongly connected: no path {witness[0]!r} -> {witness[1]!r}")
    return g
