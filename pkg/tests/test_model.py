import numpy as np
import pytest

from intermodal import ArcKind, ConfigError, DemandSet, Layer, ScenarioConfig, build_lp, build_supergraph
from intermodal.model import aggregate_commodities, expected_shape, per_request_commodities, to_lp_format

from conftest import ring_network


@pytest.fixture
def small():
    cfg = ScenarioConfig(n_R=5.0, n_M=5.0, beta_node=3.0, beta_total=6.0, h_S=100.0)
    g = build_supergraph(ring_network(4, capacity=50.0), cfg)
    d = DemandSet.from_pairs([(0, 2, 10.0), (0, 1, 5.0), (3, 1, 7.0)])
    return g, d, cfg


def test_commodity_grouping(small):
    g, d, _ = small
    agg = aggregate_commodities(g, d)
    assert [c.origin for c in agg] == [g.index((Layer.WALKING, 0)), g.index((Layer.WALKING, 3))]
    assert agg[0].rate == 15.0 and agg[1].rate == 7.0
    assert len(per_request_commodities(g, d)) == 3


@pytest.mark.parametrize("congestion, keep", [("threshold", False), ("pwl", False), ("pwl", True)])
def test_shape_matches_closed_form(small, congestion, keep):
    g, d, cfg = small
    cfg = cfg.replace(congestion_model=congestion, pwl_segments=3, pwl_keep_capacity=keep)
    lp = build_lp(g, d, cfg)
    assert lp.shape == expected_shape(g, 2, cfg)
    assert lp.A_eq.shape == (lp.shape[0], lp.shape[2])
    assert lp.A_ub.shape == (lp.shape[1], lp.shape[2])


def test_sioux_falls_shape(sf_scenario, sf_config):
    g, d = sf_scenario
    lp = build_lp(g, d, sf_config)
    assert lp.shape == (1777, 223, 7900)


def test_conservation_rows(small):
    g, d, cfg = small
    lp = build_lp(g, d, cfg)
    N = g.N
    cons = lp.A_eq[lp.eq_rows["user_conservation"]]
    B = g.incidence_matrix()
    # each commodity block is the supergraph incidence matrix
    for m in range(2):
        block = cons[m * N:(m + 1) * N, m * g.E:(m + 1) * g.E]
        assert (block != B).nnz == 0
    assert lp.b_eq[:N].sum() == 0.0
    assert lp.b_eq[g.index((Layer.WALKING, 0))] == -15.0


def test_objective_and_fleet_coefficients(small):
    g, d, cfg = small
    lp = build_lp(g, d, cfg)
    idx = lp.index
    road = g.arcs_of(ArcKind.ROAD)
    np.testing.assert_array_equal(lp.c[idx.user(1, np.arange(g.E))], g.time)
    assert np.all(lp.c[idx.rebalancing_slice] == 0) and np.all(lp.c[idx.beta_in_slice] == 0)
    fleet = lp.A_ub[lp.ub_rows["amod_fleet"]].toarray().ravel()
    np.testing.assert_allclose(fleet[idx.user(0, road)], g.time[road])
    assert np.all(fleet[idx.rebalancing_slice] == 0)
    lp2 = build_lp(g, d, cfg.replace(include_rebalancing_in_fleet=True))
    fleet2 = lp2.A_ub[lp2.ub_rows["amod_fleet"]].toarray().ravel()
    np.testing.assert_allclose(fleet2[idx.rebalancing_slice], g.time[road])


def test_pwl_epigraph_rows(small):
    g, d, cfg = small
    cfg = cfg.replace(congestion_model="pwl", pwl_segments=2)
    lp = build_lp(g, d, cfg)
    idx = lp.index
    assert np.all(lp.c[idx.user(0, g.arcs_of(ArcKind.ROAD))] == 0)
    assert np.all(lp.c[idx.epigraph_slice] == 1)
    cuts = lp.A_ub[lp.ub_rows["latency_cuts"]]
    # first cut of each arc is the free-flow tangent through the origin
    row = cuts[0].toarray().ravel()
    assert row[idx.epigraph(0)] == -1.0
    assert row[idx.rebalancing(0)] == pytest.approx(g.time[g.arcs_of(ArcKind.ROAD)[0]])
    assert lp.b_ub[lp.ub_rows["latency_cuts"]][0] == pytest.approx(0.0)


def test_beta_nodes_fix_columns(small):
    g, d, cfg = small
    lp = build_lp(g, d, cfg.replace(beta_nodes=(2,)))
    ub_in = lp.ub[lp.index.beta_in_slice]
    assert list(ub_in == 0) == [True, False, True, True]


def test_rejects_empty_and_uncapacitated_threshold(small):
    g, d, cfg = small
    with pytest.raises(ConfigError):
        build_lp(g, DemandSet(()), cfg)
    g_inf = build_supergraph(ring_network(4), cfg)
    with pytest.raises(ConfigError, match="finite capacity"):
        build_lp(g_inf, d, cfg)


def test_lp_format_export(small, tmp_path):
    import highspy

    from intermodal import solve

    g, d, cfg = small
    lp = build_lp(g, d, cfg.replace(beta_nodes=(1, 2)))
    text = to_lp_format(lp)
    assert "np." not in text
    assert "Subject To" in text and text.rstrip().endswith("End")
    path = tmp_path / "model.lp"
    path.write_text(text)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(solve(lp).objective, rel=1e-9)


def test_demand_scaling_is_homogeneous_when_limits_slack(sf_scenario, sf_config):
    from intermodal import solve
    from intermodal.oracle import relaxed_config, relaxed_graph

    g, d = sf_scenario
    g, cfg = relaxed_graph(g), relaxed_config(sf_config)
    base = solve(build_lp(g, d, cfg)).objective
    half = solve(build_lp(g, d.scaled(0.5), cfg)).objective
    assert half == pytest.approx(0.5 * base, rel=1e-9)


def test_fleet_budget_variants_on_sioux_falls(sf_scenario, sf_config):
    from intermodal import scenario_metrics, solve, verify

    g, d = sf_scenario
    out = {}
    for flag in (False, True):
        lp = build_lp(g, d, sf_config.replace(n_R=4000, include_rebalancing_in_fleet=flag))
        sol = solve(lp)
        assert verify(sol, lp).ok
        out[flag] = scenario_metrics(sol, lp, d)
    # charging empty trips to the fleet can only tighten the budget
    assert out[True].objective >= out[False].objective * (1 - 1e-12)
    assert out[True].share_amod <= out[False].share_amod + 1e-9
