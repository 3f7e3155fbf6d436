"""Command-line entry point: ``intermodal solve | sweep | validate``.

Exit codes: 0 success, 1 usage, 2 data/parse error, 3 infeasible,
4 numerical failure (including a failed cross-check).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from .config import CongestionModel, ScenarioConfig, load_config
from .errors import ConfigError, GraphError, IntermodalError, NumericalFailure, ParseError, UnreachableError
from .experiments import (
    SWEEP_PARAMS, InfeasibleScenario, detect_steady_state, parse_values, run_scenario, sweep,
    write_record, write_sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3, 4

log = logging.getLogger("intermodal")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--congestion", choices=[m.value for m in CongestionModel], default=argparse.SUPPRESS,
                   help="road congestion model (overrides the config)")
    p.add_argument("--pwl-segments", type=int, default=argparse.SUPPRESS, metavar="K",
                   help="tangent cuts per road arc in pwl mode")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="intermodal", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="solve one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the result record (JSON) here")
    p.add_argument("--lp-out", help="also export the LP in CPLEX LP format")

    p = sub.add_parser("sweep", parents=[common], help="re-solve over values of one parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma list or start:stop:step")
    p.add_argument("--out", required=True, help="CSV path; a .json sidecar is written next to it")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", parents=[common], help="run the oracle cross-checks")
    p.add_argument("--config", required=True)
    return parser


def _config(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config)
    changes = {}
    if "congestion" in args:
        changes["congestion_model"] = args.congestion
    if "pwl_segments" in args:
        changes["pwl_segments"] = args.pwl_segments
    return cfg.replace(**changes) if changes else cfg


def _cmd_solve(args) -> int:
    cfg = _config(args)
    record = run_scenario(cfg)
    if args.out:
        write_record(record, args.out)
    if args.lp_out:
        from .ingest import load_scenario
        from .model import build_lp, to_lp_format

        g, d = load_scenario(cfg)
        with open(args.lp_out, "w") as fh:
            fh.write(to_lp_format(build_lp(g, d, cfg)))
    shown = {k: record[k] for k in ("t_avg", "share_walking", "share_micromobility", "share_amod",
                                    "amod_rebalancing_total", "micro_rebalancing_total", "objective")}
    print(json.dumps(shown, indent=2))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = parse_values(args.values)
    except ValueError as exc:
        print(f"intermodal sweep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows = sweep(cfg, args.param, values, workers=max(1, args.workers))
    csv_path, sidecar = write_sweep(rows, args.out)
    ok = [r for r in rows if r["status"] == "optimal"]
    failed = len(rows) - len(ok)
    if ok:
        knee = detect_steady_state([r["value"] for r in ok], [r["t_avg"] for r in ok])
        print(f"steady state from {args.param} = {knee:g}" if knee is not None else "no steady state detected")
    print(f"wrote {csv_path} and {sidecar} ({len(rows)} points, {failed} failed)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from . import oracle
    from .ingest import load_scenario
    from .metrics import modal_share_time, scenario_metrics
    from .model import build_lp
    from .solve import solve, verify

    cfg = _config(args)
    results = []

    g, d = load_scenario(cfg)
    lp = build_lp(g, d, cfg)
    sol = solve(lp)
    if not sol.optimal:
        raise InfeasibleScenario(f"configured scenario is {sol.status.value}")
    rep = verify(sol, lp)
    results.append(("configured scenario verifies", rep.ok, rep.summary()))
    bound = oracle.uncapacitated_optimum(g, d) / d.total_rate
    t_avg = scenario_metrics(sol, lp, d).t_avg
    results.append(("t_avg >= shortest-path lower bound", t_avg >= bound * (1 - 1e-9),
                    f"{t_avg:.6g} vs {bound:.6g}"))

    relaxed = oracle.relaxed_config(cfg)
    g_rel = oracle.relaxed_graph(g)
    sol_rel = solve(build_lp(g_rel, d, relaxed))
    ref = oracle.uncapacitated_optimum(g_rel, d)
    err = abs(sol_rel.objective - ref) / abs(ref)
    results.append(("uncapacitated LP equals shortest-path oracle", err <= 1e-6, f"rel err {err:.2e}"))

    walk_cfg = cfg.replace(n_R=0.0, n_M=0.0, congestion_model=CongestionModel.THRESHOLD)
    lp_w = build_lp(g, d, walk_cfg)
    sol_w = solve(lp_w)
    ref_w = oracle.walking_only_optimum(g, d) / d.total_rate
    t_w = scenario_metrics(sol_w, lp_w, d).t_avg
    err_w = abs(t_w - ref_w) / ref_w
    shares = modal_share_time(sol_w, g)
    results.append(("walking-only baseline equals walking oracle", err_w <= 1e-6 and shares == (1.0, 0.0, 0.0),
                    f"rel err {err_w:.2e}, shares {shares}"))

    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": _cmd_solve, "sweep": _cmd_sweep, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except (ConfigError, ParseError, GraphError, UnreachableError, OSError) as exc:
        print(f"intermodal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InfeasibleScenario as exc:
        print(f"intermodal: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailure as exc:
        print(f"intermodal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IntermodalError as exc:
        print(f"intermodal: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
