"""Readers and writers for the TNTP network and trips formats, plus scenario
assembly (road layer, supergraph and demand set from a config)."""

from __future__ import annotations

import dataclasses
import math
import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ScenarioConfig
from .errors import ConfigError, GraphError, ParseError
from .graph import Layer, LayeredNetwork, NodeRef, Request, Supergraph, build_supergraph, layer_arc

NET_FIELDS = (
    "init_node", "term_node", "capacity", "length", "free_flow_time",
    "b", "power", "speed", "toll", "link_type",
)
_TAG = re.compile(r"^\s*<([^>]+)>(.*)$")
_OD_ENTRY = re.compile(r"^\s*(\S+)\s*:\s*(\S+)\s*$")


@dataclasses.dataclass(frozen=True)
class TntpLink:
    init_node: int
    term_node: int
    capacity: float
    length: float
    free_flow_time: float
    b: float
    power: float
    speed: float
    toll: float
    link_type: int

    def __post_init__(self) -> None:
        if self.init_node == self.term_node:
            raise ValueError(f"link {self.init_node}->{self.term_node} is a self-loop")
        if not self.capacity > 0:
            raise ValueError(f"link {self.init_node}->{self.term_node} has capacity {self.capacity}")
        if self.length < 0:
            raise ValueError(f"link {self.init_node}->{self.term_node} has negative length")


@dataclasses.dataclass(frozen=True)
class TntpNetwork:
    node_count: int
    first_thru_node: int
    links: tuple[TntpLink, ...]
    zone_count: int | None = None
    metadata: tuple[tuple[str, str], ...] = dataclasses.field(default=(), compare=False)


@dataclasses.dataclass(frozen=True)
class TripsTable:
    zone_count: int
    total_od_flow: float | None
    matrix: np.ndarray
    diagonal: np.ndarray

    @property
    def total(self) -> float:
        """Sum of the off-diagonal O-D flows."""
        return float(self.matrix.sum())

    @property
    def diagonal_total(self) -> float:
        return float(self.diagonal.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripsTable):
            return NotImplemented
        return (self.zone_count == other.zone_count
                and self.total_od_flow == other.total_od_flow
                and np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.diagonal, other.diagonal))


def _strip_comment(line: str) -> str:
    return line.split("~", 1)[0]


def _read_metadata(lines: list[str]) -> tuple[dict[str, str], int]:
    """Return (tags, index of first body line)."""
    tags: dict[str, str] = {}
    for i, line in enumerate(lines):
        m = _TAG.match(line)
        if m is None:
            continue
        name = m.group(1).strip().upper()
        if name == "END OF METADATA":
            return tags, i + 1
        tags[name] = m.group(2).strip()
    raise ParseError("missing <END OF METADATA> tag")


def _int_tag(tags: dict[str, str], name: str, required: bool = True) -> int | None:
    if name not in tags:
        if required:
            raise ParseError(f"missing <{name}> tag")
        return None
    try:
        return int(float(_strip_comment(tags[name]).split()[0]))
    except (ValueError, IndexError):
        raise ParseError(f"<{name}> is not a number: {tags[name]!r}") from None


def parse_net(text: str) -> TntpNetwork:
    """Parse a TNTP ``*_net.tntp`` file."""
    lines = text.splitlines()
    tags, start = _read_metadata(lines)
    node_count = _int_tag(tags, "NUMBER OF NODES")
    link_count = _int_tag(tags, "NUMBER OF LINKS")
    first_thru = _int_tag(tags, "FIRST THRU NODE", required=False) or 1
    zones = _int_tag(tags, "NUMBER OF ZONES", required=False)

    links = []
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        if body.endswith(";"):
            body = body[:-1]
        fields = body.split()
        if len(fields) != len(NET_FIELDS):
            raise ParseError(f"expected {len(NET_FIELDS)} link fields, found {len(fields)}", lineno)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric link field in {body!r}", lineno) from None
        for pos in (0, 1, 9):
            if values[pos] != int(values[pos]):
                raise ParseError(f"{NET_FIELDS[pos]} must be an integer", lineno)
        try:
            link = TntpLink(
                int(values[0]), int(values[1]), *values[2:9], int(values[9])
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        for end in (link.init_node, link.term_node):
            if not 1 <= end <= node_count:
                raise ParseError(f"node {end} outside 1..{node_count}", lineno)
        links.append(link)
    if len(links) != link_count:
        raise ParseError(f"<NUMBER OF LINKS> says {link_count} but {len(links)} rows were read")
    meta = tuple((k, v) for k, v in tags.items())
    return TntpNetwork(node_count, first_thru, tuple(links), zones, meta)


def _num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def format_net(net: TntpNetwork) -> str:
    """Serialize a network back to TNTP text. ``parse_net`` inverts it exactly."""
    out = []
    if net.zone_count is not None:
        out.append(f"<NUMBER OF ZONES> {net.zone_count}")
    out += [
        f"<NUMBER OF NODES> {net.node_count}",
        f"<FIRST THRU NODE> {net.first_thru_node}",
        f"<NUMBER OF LINKS> {len(net.links)}",
        "<END OF METADATA>",
        "",
        "~\t" + "\t".join(NET_FIELDS) + "\t;",
    ]
    for link in net.links:
        row = [_num(getattr(link, f)) for f in NET_FIELDS]
        out.append("\t" + "\t".join(row) + "\t;")
    return "\n".join(out) + "\n"


def parse_trips(text: str) -> TripsTable:
    """Parse a TNTP ``*_trips.tntp`` file into a dense zone x zone matrix.

    Diagonal (intra-zonal) entries are dropped from the matrix and kept apart
    in ``diagonal``.
    """
    lines = text.splitlines()
    tags, start = _read_metadata(lines)
    zones = _int_tag(tags, "NUMBER OF ZONES")
    total = None
    if "TOTAL OD FLOW" in tags:
        try:
            total = float(_strip_comment(tags["TOTAL OD FLOW"]).split()[0])
        except (ValueError, IndexError):
            raise ParseError(f"<TOTAL OD FLOW> is not a number: {tags['TOTAL OD FLOW']!r}") from None

    matrix = np.zeros((zones, zones))
    diagonal = np.zeros(zones)
    origin = None
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        body = _strip_comment(raw).strip()
        if not body:
            continue
        head = body.split()
        if head[0].lower() == "origin":
            if len(head) != 2:
                raise ParseError(f"malformed origin line {body!r}", lineno)
            try:
                origin = int(head[1])
            except ValueError:
                raise ParseError(f"origin {head[1]!r} is not an integer", lineno) from None
            if not 1 <= origin <= zones:
                raise ParseError(f"origin zone {origin} outside 1..{zones}", lineno)
            continue
        if origin is None:
            raise ParseError("destination entries before any 'Origin' line", lineno)
        if not body.endswith(";"):
            raise ParseError(f"entry list not terminated by ';': {body!r}", lineno)
        for token in body.split(";")[:-1]:
            m = _OD_ENTRY.match(token)
            if m is None:
                raise ParseError(f"malformed 'dest : flow;' token {token.strip()!r}", lineno)
            try:
                dest, flow = int(m.group(1)), float(m.group(2))
            except ValueError:
                raise ParseError(f"malformed 'dest : flow;' token {token.strip()!r}", lineno) from None
            if not 1 <= dest <= zones:
                raise ParseError(f"destination zone {dest} outside 1..{zones}", lineno)
            if flow < 0 or not math.isfinite(flow):
                raise ParseError(f"invalid flow {flow}", lineno)
            if dest == origin:
                diagonal[dest - 1] += flow
            else:
                matrix[origin - 1, dest - 1] += flow
    return TripsTable(zones, total, matrix, diagonal)


def format_trips(trips: TripsTable) -> str:
    """Serialize a trips table; ``parse_trips`` inverts it exactly."""
    out = [f"<NUMBER OF ZONES> {trips.zone_count}"]
    if trips.total_od_flow is not None:
        out.append(f"<TOTAL OD FLOW> {trips.total_od_flow!r}")
    out += ["<END OF METADATA>", "", ""]
    for i in range(trips.zone_count):
        out.append(f"Origin \t{i + 1}")
        row = trips.matrix[i].copy()
        row[i] = trips.diagonal[i]
        entries = [f"{j + 1:5d} : {float(row[j])!r};" for j in range(trips.zone_count)]
        for k in range(0, len(entries), 5):
            out.append("\t".join(entries[k:k + 5]))
        out.append("")
    return "\n".join(out) + "\n"


@dataclasses.dataclass(frozen=True)
class DemandSet:
    requests: tuple[Request, ...]

    def __post_init__(self) -> None:
        merged: dict[tuple[NodeRef, NodeRef], float] = {}
        for r in self.requests:
            key = (r.origin, r.destination)
            merged[key] = merged.get(key, 0.0) + r.rate
        if len(merged) != len(self.requests):
            object.__setattr__(
                self, "requests", tuple(Request(o, d, rate) for (o, d), rate in merged.items())
            )
        else:
            object.__setattr__(self, "requests", tuple(self.requests))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int, float]]) -> DemandSet:
        """Requests from (origin, destination, rate) walking-layer local ids."""
        return cls(tuple(
            Request(NodeRef(Layer.WALKING, o), NodeRef(Layer.WALKING, d), float(rate))
            for o, d, rate in pairs
        ))

    @property
    def total_rate(self) -> float:
        return float(sum(r.rate for r in self.requests))

    def __len__(self) -> int:
        return len(self.requests)

    def scaled(self, factor: float) -> DemandSet:
        return DemandSet(tuple(Request(r.origin, r.destination, r.rate * factor) for r in self.requests))


def road_network(net: TntpNetwork, config: ScenarioConfig) -> LayeredNetwork:
    arcs = [
        layer_arc(Layer.ROAD, link.init_node - 1, link.term_node - 1,
                  link.length * config.length_unit_to_km, config.speed_road, link.capacity)
        for link in net.links
    ]
    return LayeredNetwork(Layer.ROAD, net.node_count, arcs)


def demand_from_trips(trips: TripsTable, node_count: int, scale: float) -> DemandSet:
    if trips.zone_count != node_count:
        raise GraphError(
            f"trips file has {trips.zone_count} zones but the network has {node_count} nodes; "
            "zones must coincide with nodes"
        )
    rows, cols = np.nonzero(trips.matrix)
    return DemandSet.from_pairs(
        (int(i), int(j), trips.matrix[i, j] * scale) for i, j in zip(rows, cols)
    )


def build_scenario(net: TntpNetwork, trips: TripsTable,
                   config: ScenarioConfig) -> tuple[Supergraph, DemandSet]:
    g = build_supergraph(road_network(net, config), config)
    return g, demand_from_trips(trips, net.node_count, config.demand_scale)


def load_scenario(config: ScenarioConfig) -> tuple[Supergraph, DemandSet]:
    """Read the network and trips files named by ``config`` and build the scenario."""
    texts = []
    for name in ("network", "trips"):
        path = config.resolve(name)
        try:
            texts.append(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {name} file {path}: {exc.strerror}") from None
    return build_scenario(parse_net(texts[0]), parse_trips(texts[1]), config)
