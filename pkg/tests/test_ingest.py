import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intermodal import ConfigError, DemandSet, GraphError, ParseError, ScenarioConfig, load_config, load_scenario
from intermodal.data import path as data_path
from intermodal.ingest import (
    TntpLink, TntpNetwork, TripsTable, demand_from_trips, format_net, format_trips, parse_net, parse_trips,
)

NET_HEADER = "<NUMBER OF NODES> 3\n<NUMBER OF LINKS> {n}\n<END OF METADATA>\n"
ROW = "1 2 10 1.5 1 0.15 4 0 0 1 ;"


def _net(rows, n=None):
    return NET_HEADER.format(n=len(rows) if n is None else n) + "\n".join(rows) + "\n"


def test_sioux_falls_net_golden():
    net = parse_net(data_path("SiouxFalls_net.tntp").read_text())
    assert net.node_count == 24 and len(net.links) == 76
    assert net.zone_count == 24 and net.first_thru_node == 1
    first = net.links[0]
    assert (first.init_node, first.term_node, first.capacity, first.length) == (1, 2, 25900.20064, 6.0)


def test_sioux_falls_trips_golden():
    trips = parse_trips(data_path("SiouxFalls_trips.tntp").read_text())
    assert trips.zone_count == 24
    assert trips.total_od_flow == 360600.0
    assert trips.total == pytest.approx(360600.0, abs=1e-6)
    assert trips.matrix[0, 1] == 100.0 and trips.matrix[23, 22] == 700.0
    assert np.count_nonzero(trips.matrix) == 528


def test_round_trip_bundled_files():
    for name in ("SiouxFalls_net.tntp", "toy_net.tntp"):
        net = parse_net(data_path(name).read_text())
        assert parse_net(format_net(net)) == net
    for name in ("SiouxFalls_trips.tntp", "toy_trips.tntp"):
        trips = parse_trips(data_path(name).read_text())
        assert parse_trips(format_trips(trips)) == trips


def test_net_row_without_semicolon_and_comments():
    text = _net(["~ header comment", "1 2 10 1.5 1 0.15 4 0 0 1", "2 1 10 1.5 1 0.15 4 0 0 1 ; ~ tail"], n=2)
    net = parse_net(text)
    assert len(net.links) == 2 and net.first_thru_node == 1


@pytest.mark.parametrize("rows, n, needle, line", [
    (["1 2 10 1.5 1 0.15 4 0 0 ;"], None, "expected 10", 4),
    (["1 2 ten 1.5 1 0.15 4 0 0 1 ;"], None, "non-numeric", 4),
    (["1 1 10 1.5 1 0.15 4 0 0 1 ;"], None, "self-loop", 4),
    (["1 2 0 1.5 1 0.15 4 0 0 1 ;"], None, "capacity", 4),
    ([ROW, "1 7 10 1.5 1 0.15 4 0 0 1 ;"], None, "outside", 5),
    (["1.5 2 10 1.5 1 0.15 4 0 0 1 ;"], None, "integer", 4),
])
def test_net_errors_carry_line_numbers(rows, n, needle, line):
    with pytest.raises(ParseError, match=needle) as info:
        parse_net(_net(rows, n))
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_net_header_errors():
    with pytest.raises(ParseError, match="NUMBER OF LINKS"):
        parse_net(_net([ROW], n=2))
    with pytest.raises(ParseError, match="NUMBER OF NODES"):
        parse_net("<NUMBER OF LINKS> 0\n<END OF METADATA>\n")
    with pytest.raises(ParseError, match="END OF METADATA"):
        parse_net("<NUMBER OF NODES> 3\n<NUMBER OF LINKS> 0\n")


def test_trips_errors():
    head = "<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 5\n<END OF METADATA>\n"
    with pytest.raises(ParseError, match="before any") as info:
        parse_trips(head + "2 : 5.0;\n")
    assert info.value.line == 4
    with pytest.raises(ParseError, match="terminated"):
        parse_trips(head + "Origin 1\n2 : 5.0\n")
    with pytest.raises(ParseError, match="outside"):
        parse_trips(head + "Origin 1\n3 : 5.0;\n")
    with pytest.raises(ParseError, match="origin zone"):
        parse_trips(head + "Origin 4\n")
    with pytest.raises(ParseError, match="malformed"):
        parse_trips(head + "Origin 1\n2 = 5.0;\n")


def test_trips_diagonal_kept_apart():
    text = "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n1 : 3.0; 2 : 4.0;\n"
    trips = parse_trips(text)
    assert trips.total == 4.0 and trips.diagonal_total == 3.0 and trips.total_od_flow is None
    assert parse_trips(format_trips(trips)) == trips


_flows = st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(_flows, min_size=n * n, max_size=n * n))))
def test_trips_round_trip_property(arg):
    n, flows = arg
    m = np.array(flows).reshape(n, n)
    diag = np.diag(m).copy()
    np.fill_diagonal(m, 0.0)
    trips = TripsTable(n, float(m.sum() + diag.sum()), m, diag)
    assert parse_trips(format_trips(trips)) == trips


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5),
                          st.floats(1e-3, 1e5), st.floats(0, 1e3), st.floats(0, 100)),
                min_size=1, max_size=10))
def test_net_round_trip_property(rows):
    links = tuple(TntpLink(a, b, cap, length, fft, 0.15, 4.0, 0.0, 0.0, 1)
                  for a, b, cap, length, fft in rows if a != b)
    net = TntpNetwork(5, 1, links, None)
    assert parse_net(format_net(net)) == net


def test_demand_set_merges_duplicates():
    d = DemandSet.from_pairs([(0, 1, 2.0), (0, 1, 3.0), (1, 0, 1.0)])
    assert len(d) == 2 and d.total_rate == 6.0
    assert d.scaled(0.5).total_rate == 3.0


def test_demand_from_trips_zone_mismatch():
    trips = TripsTable(3, None, np.ones((3, 3)) - np.eye(3), np.zeros(3))
    with pytest.raises(GraphError, match="zones"):
        demand_from_trips(trips, 4, 1.0)
    d = demand_from_trips(trips, 3, 0.1)
    assert len(d) == 6 and d.total_rate == pytest.approx(0.6)


def test_load_scenario(sf_config, sf_scenario):
    g, d = sf_scenario
    assert (g.N, g.E) == (72, 324)
    assert len(d) == 528
    assert d.total_rate == pytest.approx(36060.0)


def test_load_scenario_missing_file(tmp_path):
    cfg = ScenarioConfig(network=str(tmp_path / "nope.tntp"), trips="toy_trips.tntp")
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(cfg)


def test_config_round_trip_and_errors(tmp_path):
    cfg = load_config("sioux_falls")
    again = ScenarioConfig.from_dict(cfg.to_dict())
    assert again == cfg
    inf_cfg = ScenarioConfig.from_dict({"n_R": None})
    assert math.isinf(inf_cfg.n_R) and inf_cfg.to_dict()["n_R"] is None
    with pytest.raises(ConfigError, match="unknown"):
        ScenarioConfig.from_dict({"fleet": 3})
    with pytest.raises(ConfigError):
        ScenarioConfig(n_R=-1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(congestion_model="quadratic")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"n_M": "lots"})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
