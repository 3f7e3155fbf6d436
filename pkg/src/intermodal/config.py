"""Scenario configuration: fleet sizes, capacities, speeds and solver options.

A scenario is stored on disk as a flat JSON object. ``null`` stands for an
unconstrained (infinite) capacity or budget; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from pathlib import Path
from typing import Any

from .errors import ConfigError

HOURS_PER_MINUTE = 1.0 / 60.0


class CongestionModel(str, enum.Enum):
    THRESHOLD = "threshold"
    PIECEWISE_BPR = "pwl"


# Fields that may be ``null`` in JSON (meaning +inf).
_INFINITE_OK = ("n_R", "n_M", "beta_node", "beta_total", "h_S")


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    network: str | None = None
    trips: str | None = None
    speed_walk: float = 3.0
    speed_micro: float = 15.0
    speed_road: float = 45.0
    n_R: float = math.inf
    n_M: float = math.inf
    beta_node: float = math.inf
    beta_total: float = math.inf
    h_S: float = math.inf
    switching_time: float = HOURS_PER_MINUTE
    demand_scale: float = 0.1
    length_unit_to_km: float = 1.0
    congestion_model: CongestionModel = CongestionModel.THRESHOLD
    pwl_segments: int = 4
    pwl_xmax_factor: float = 2.0
    pwl_keep_capacity: bool = False
    include_rebalancing_in_fleet: bool = False
    aggregate_commodities: bool = True
    tiebreak_rebalancing: bool = True
    switch_nodes: tuple[int, ...] | None = None
    beta_nodes: tuple[int, ...] | None = None
    base_dir: str | None = dataclasses.field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.congestion_model, CongestionModel):
            try:
                object.__setattr__(
                    self, "congestion_model", CongestionModel(self.congestion_model)
                )
            except ValueError:
                raise ConfigError(
                    f"congestion_model must be one of "
                    f"{[m.value for m in CongestionModel]}, got {self.congestion_model!r}"
                ) from None
        for name in ("switch_nodes", "beta_nodes"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(int(v) for v in value))
        self.validate()

    def validate(self) -> None:
        for name in ("speed_walk", "speed_micro", "speed_road"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in _INFINITE_OK:
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
        if not self.switching_time > 0:
            raise ConfigError("switching_time must be positive")
        if not self.demand_scale > 0:
            raise ConfigError("demand_scale must be positive")
        if not self.length_unit_to_km > 0:
            raise ConfigError("length_unit_to_km must be positive")
        if int(self.pwl_segments) != self.pwl_segments or self.pwl_segments < 1:
            raise ConfigError("pwl_segments must be an integer >= 1")
        if not self.pwl_xmax_factor > 0:
            raise ConfigError("pwl_xmax_factor must be positive")

    @property
    def speeds(self) -> tuple[float, float, float]:
        """(walking, micromobility, road) speeds in km/h."""
        return (self.speed_walk, self.speed_micro, self.speed_road)

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def resolve(self, name: str) -> Path:
        """Resolve a data file path relative to the config file directory.

        Falls back to the bundled data directory so that the shipped
        scenarios work from any working directory.
        """
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"config does not name a {name} file")
        path = Path(value)
        if not path.is_absolute() and self.base_dir is not None:
            candidate = Path(self.base_dir) / path
            if candidate.exists():
                return candidate
        if path.exists():
            return path
        from . import data

        bundled = data.path(path.name)
        if bundled.exists():
            return bundled
        return Path(self.base_dir or ".") / path

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            if f.name == "base_dir":
                continue
            value = getattr(self, f.name)
            if isinstance(value, CongestionModel):
                value = value.value
            elif isinstance(value, float) and math.isinf(value):
                value = None
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base_dir: str | None = None) -> ScenarioConfig:
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(raw)
        for name in _INFINITE_OK:
            if name in kwargs and kwargs[name] is None:
                kwargs[name] = math.inf
        for name, value in kwargs.items():
            if name in _INFINITE_OK or name in (
                "speed_walk", "speed_micro", "speed_road", "switching_time",
                "demand_scale", "length_unit_to_km", "pwl_xmax_factor",
            ):
                try:
                    kwargs[name] = float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{name} must be a number, got {value!r}") from None
        return cls(**kwargs, base_dir=base_dir)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        from . import data

        bundled = data.path(path.name if path.suffix else f"{path.name}.json")
        if not bundled.exists():
            raise ConfigError(f"config file not found: {path}")
        path = bundled
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ScenarioConfig.from_dict(raw, base_dir=str(path.parent))
