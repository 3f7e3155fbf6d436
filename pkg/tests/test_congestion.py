import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intermodal.congestion import (
    BprParams, bpr_time, breakpoints, linearize_total_latency, pwl_max, road_times, total_latency,
)


def test_bpr_values():
    p = BprParams(t0=0.2, h=100.0)
    assert bpr_time(p, 0.0) == 0.2
    assert bpr_time(p, 100.0) == pytest.approx(0.2 * 1.15)
    assert bpr_time(p, 200.0) == pytest.approx(0.2 * (1 + 0.15 * 16))
    assert total_latency(p, 50.0) == pytest.approx(50 * 0.2 * (1 + 0.15 / 16))
    with pytest.raises(ValueError):
        bpr_time(p, -1.0)
    with pytest.raises(ValueError):
        BprParams(t0=0.0, h=1.0)


def test_breakpoints_are_nested():
    assert list(breakpoints(4, 8.0)) == [0.0, 2.0, 4.0, 6.0]
    for K in (1, 2, 4):
        assert set(breakpoints(K, 8.0)) <= set(breakpoints(2 * K, 8.0))
    with pytest.raises(ValueError):
        breakpoints(0, 1.0)


def test_tangent_at_zero_is_free_flow_line():
    p = BprParams(t0=0.5, h=10.0)
    (seg,) = linearize_total_latency(p, 1)
    assert seg.slope == 0.5 and seg.intercept == 0.0


def test_slopes_increase():
    segs = linearize_total_latency(BprParams(1.0, 3.0), 8)
    slopes = [s.slope for s in segs]
    assert slopes == sorted(slopes)


def test_road_times_vectorised():
    t0 = np.array([0.1, 0.2])
    cap = np.array([10.0, 20.0])
    x = np.array([10.0, 0.0])
    np.testing.assert_allclose(road_times(t0, cap, x), [0.115, 0.2])


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(1e-2, 1e5), st.sampled_from([1, 2, 3, 4, 8, 16]),
       st.floats(0.0, 3.0))
def test_tangents_underestimate(t0, h, K, frac):
    p = BprParams(t0, h)
    segs = linearize_total_latency(p, K)
    x = frac * h
    exact = total_latency(p, x)
    assert pwl_max(segs, x) <= exact * (1 + 1e-12) + 1e-12
