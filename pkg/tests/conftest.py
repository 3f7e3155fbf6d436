import math

import numpy as np
import pytest

from intermodal import DemandSet, Layer, LayeredNetwork, ScenarioConfig, build_supergraph, load_config, load_scenario
from intermodal.graph import layer_arc


def ring_network(n: int, lengths=None, capacity: float = math.inf, chords=()) -> LayeredNetwork:
    """Bidirectional ring on ``n`` road nodes plus optional (u, v, length) chords."""
    lengths = lengths if lengths is not None else [1.0] * n
    arcs = []
    for i in range(n):
        j = (i + 1) % n
        arcs.append(layer_arc(Layer.ROAD, i, j, lengths[i], 45.0, capacity))
        arcs.append(layer_arc(Layer.ROAD, j, i, lengths[i], 45.0, capacity))
    for u, v, length in chords:
        arcs.append(layer_arc(Layer.ROAD, u, v, length, 45.0, capacity))
    return LayeredNetwork(Layer.ROAD, n, arcs)


def random_instance(rng: np.random.Generator, max_nodes: int = 8, max_requests: int = 6):
    """Small strongly connected road network, random limits and demand."""
    n = int(rng.integers(3, max_nodes + 1))
    lengths = rng.uniform(0.5, 5.0, size=n)
    chords = []
    for _ in range(int(rng.integers(0, n))):
        u, v = rng.choice(n, size=2, replace=False)
        chords.append((int(u), int(v), float(rng.uniform(0.5, 5.0))))
    road = ring_network(n, lengths, capacity=float(rng.uniform(20, 200)), chords=chords)
    pairs = set()
    while len(pairs) < int(rng.integers(1, max_requests + 1)):
        o, d = rng.choice(n, size=2, replace=False)
        pairs.add((int(o), int(d)))
    demand = DemandSet.from_pairs((o, d, float(rng.uniform(5, 60))) for o, d in sorted(pairs))
    cfg = ScenarioConfig(
        n_R=float(rng.uniform(0.5, 10)), n_M=float(rng.uniform(0.5, 10)),
        beta_node=float(rng.uniform(0, 20)), beta_total=float(rng.uniform(0, 40)),
        h_S=float(rng.uniform(20, 200)), demand_scale=1.0,
    )
    return build_supergraph(road, cfg), demand, cfg


@pytest.fixture(scope="session")
def sf_config():
    return load_config("sioux_falls")


@pytest.fixture(scope="session")
def sf_scenario(sf_config):
    return load_scenario(sf_config)


@pytest.fixture(scope="session")
def toy_config():
    return load_config("toy")


@pytest.fixture(scope="session")
def toy_scenario(toy_config):
    return load_scenario(toy_config)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
