"""Single-scenario runs and one-parameter sweeps with CSV/JSON output."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import ScenarioConfig
from .errors import IntermodalError, NumericalFailure
from .ingest import load_scenario
from .metrics import CSV_FIELDS, scenario_metrics
from .model import build_lp
from .solve import solve, verify

log = logging.getLogger(__name__)

SWEEP_PARAMS = ("n_R", "n_M", "beta_node", "beta_total", "h_S", "demand_scale")
STEADY_TOL = 1e-4

SWEEP_FIELDS = ("param", "value", "status") + CSV_FIELDS + (
    "duality_gap", "max_eq_residual", "max_commodity_residual", "verified",
)


class InfeasibleScenario(IntermodalError):
    pass


def run_scenario(cfg: ScenarioConfig) -> dict[str, Any]:
    """Ingest, build, solve, verify and summarise one scenario.

    Raises :class:`InfeasibleScenario` when the LP has no solution and
    :class:`NumericalFailure` when the solution fails verification.
    """
    g, d = load_scenario(cfg)
    lp = build_lp(g, d, cfg)
    sol = solve(lp)
    if not sol.optimal:
        raise InfeasibleScenario(f"scenario is {sol.status.value}: {sol.message}")
    report = verify(sol, lp)
    if not report.ok:
        raise NumericalFailure(f"solution failed verification: {report.summary()}")
    metrics = scenario_metrics(sol, lp, d)
    return {
        "status": sol.status.value,
        **metrics.to_dict(),
        "duality_gap": sol.duality_gap,
        "max_eq_residual": report.max_eq_residual,
        "max_commodity_residual": report.max_commodity_residual,
        "verified": report.ok,
        "lp_shape": list(lp.shape),
        "config": cfg.to_dict(),
    }


def _sweep_point(args: tuple[ScenarioConfig, str, float]) -> dict[str, Any]:
    cfg, param, value = args
    point = cfg.replace(**{param: value})
    try:
        row = run_scenario(point)
    except InfeasibleScenario as exc:
        row = {"status": "infeasible", "error": str(exc)}
    except NumericalFailure as exc:
        row = {"status": "numerical_failure", "error": str(exc)}
    except IntermodalError as exc:
        row = {"status": "error", "error": str(exc)}
    row.setdefault("config", point.to_dict())
    return {"param": param, "value": value, **row}


def sweep(cfg: ScenarioConfig, param: str, values: Sequence[float], workers: int = 1) -> list[dict[str, Any]]:
    """Re-solve ``cfg`` for each value of ``param``.

    Rows come back in input order; failed points are kept with their status.
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {param!r}; choose one of {', '.join(SWEEP_PARAMS)}")
    values = [float(v) for v in values]
    if any(v < 0 for v in values):
        raise ValueError("sweep values must be non-negative")
    if values != sorted(values):
        raise ValueError("sweep values must be sorted")
    jobs = [(cfg, param, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    for row in rows:
        log.info("%s=%g: %s", param, row["value"], row["status"])
    return rows


def detect_steady_state(values: Sequence[float], t_avg: Sequence[float], tol: float = STEADY_TOL) -> float | None:
    """First swept value from which every later step changes ``t_avg`` by
    less than ``tol`` (relative). None if the tail never flattens."""
    t = np.asarray(t_avg, dtype=float)
    if len(t) < 2:
        return None
    change = np.abs(np.diff(t)) / np.maximum(np.abs(t[:-1]), np.finfo(float).tiny)
    flat = change < tol
    if not flat[-1]:
        return None
    i = len(flat)
    while i > 0 and flat[i - 1]:
        i -= 1
    return float(values[i])


def parse_values(text: str) -> list[float]:
    """``"0,1000,5000"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def write_sweep(rows: list[dict[str, Any]], path: str | Path) -> tuple[Path, Path]:
    """CSV with a fixed header plus a JSON sidecar holding each row's config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, extrasaction="ignore", restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(rows, indent=2, default=_json_default))
    return path, sidecar


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def write_record(record: dict[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2, default=_json_default))
    return path
