"""BPR volume-delay function and its piecewise-linear total-latency cuts.

Only road arcs are congestible; every other arc keeps its free-flow time.
The total latency of a road arc, ``L(x) = x * t(x)``, is convex, so its
tangents minorize it and ``max_k(slope_k * x + intercept_k)`` is an
epigraph-representable under-approximation that is exact at the tangent
points.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

BPR_ALPHA = 0.15
BPR_BETA = 4.0


@dataclasses.dataclass(frozen=True)
class BprParams:
    t0: float
    h: float
    alpha_coef: float = BPR_ALPHA
    beta_exp: float = BPR_BETA

    def __post_init__(self) -> None:
        if not self.t0 > 0:
            raise ValueError(f"free-flow time must be positive, got {self.t0}")
        if not self.h > 0:
            raise ValueError(f"capacity must be positive, got {self.h}")


@dataclasses.dataclass(frozen=True)
class PwlSegment:
    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * x + self.intercept


def bpr_time(p: BprParams, x_road):
    """Congested traversal time ``t0 * (1 + alpha * (x/h)**beta)``."""
    x = np.asarray(x_road, dtype=float)
    if np.any(x < 0):
        raise ValueError("road flow must be non-negative")
    t = p.t0 * (1.0 + p.alpha_coef * (x / p.h) ** p.beta_exp)
    return float(t) if t.ndim == 0 else t


def total_latency(p: BprParams, x):
    """``L(x) = x * bpr_time(x)``."""
    x = np.asarray(x, dtype=float)
    out = x * bpr_time(p, x)
    return float(out) if np.ndim(out) == 0 else out


def _latency_slope(p: BprParams, x: float) -> float:
    # d/dx [t0 x + t0 a x^(b+1) / h^b]
    return p.t0 * (1.0 + p.alpha_coef * (p.beta_exp + 1.0) * (x / p.h) ** p.beta_exp)


def breakpoints(K: int, x_max: float) -> np.ndarray:
    """Tangent points ``(k/K) * x_max`` for k = 0..K-1.

    Doubling K keeps every previous point, so refinements are nested.
    """
    if K < 1:
        raise ValueError(f"need at least one segment, got K={K}")
    if not x_max > 0:
        raise ValueError(f"x_max must be positive, got {x_max}")
    return np.arange(K) * (x_max / K)


def linearize_total_latency(p: BprParams, K: int, x_max: float | None = None) -> list[PwlSegment]:
    """Tangent cuts of the total-latency curve, ordered by increasing slope.

    ``x_max`` defaults to twice the arc capacity.
    """
    if x_max is None:
        x_max = 2.0 * p.h
    segments = []
    for xk in breakpoints(K, x_max):
        slope = _latency_slope(p, xk)
        segments.append(PwlSegment(slope, total_latency(p, xk) - slope * xk))
    return segments


def pwl_max(segments: Sequence[PwlSegment], x):
    """Evaluate the max-of-tangents approximation at ``x``."""
    x = np.asarray(x, dtype=float)
    vals = np.max([s.slope * x + s.intercept for s in segments], axis=0)
    return float(vals) if vals.ndim == 0 else vals


def road_times(t0: np.ndarray, capacity: np.ndarray, x_road: np.ndarray) -> np.ndarray:
    """Vectorized BPR times for a family of road arcs."""
    x_road = np.maximum(np.asarray(x_road, dtype=float), 0.0)
    return t0 * (1.0 + BPR_ALPHA * (x_road / capacity) ** BPR_BETA)
