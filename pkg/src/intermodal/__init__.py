"""Joint routing of an autonomous mobility-on-demand fleet and a micromobility
fleet as a multicommodity network-flow LP over a walking / micromobility /
road supergraph."""

from .config import CongestionModel, ScenarioConfig, load_config
from .errors import ConfigError, GraphError, IntermodalError, NumericalFailure, ParseError, UnreachableError
from .graph import Arc, ArcKind, Layer, LayeredNetwork, NodeRef, Request, Supergraph, build_supergraph
from .ingest import DemandSet, build_scenario, load_scenario, parse_net, parse_trips
from .metrics import ScenarioMetrics, scenario_metrics
from .model import LpProblem, aggregate_commodities, build_lp
from .solve import FlowSolution, SolveStatus, solve, verify

__version__ = "0.1.0"

__all__ = [
    "Arc", "ArcKind", "CongestionModel", "ConfigError", "DemandSet", "FlowSolution", "GraphError",
    "IntermodalError", "Layer", "LayeredNetwork", "LpProblem", "NodeRef", "NumericalFailure",
    "ParseError", "Request", "ScenarioConfig", "ScenarioMetrics", "SolveStatus", "Supergraph",
    "UnreachableError", "aggregate_commodities", "build_lp", "build_scenario", "build_supergraph",
    "load_config", "load_scenario", "parse_net", "parse_trips", "scenario_metrics", "solve", "verify",
]
