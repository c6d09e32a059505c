import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markersplit.adm import (
    DetectionParams,
    WindowOutOfBounds,
    count_candidates,
    detect_markers,
    is_marker_window,
)
from markersplit.codec import AudioStream
from markersplit.marker import default_template, synthesize_marker

from oracles import brute_force_detect

OPTIMAL = DetectionParams(a=27000, t=50, p=75, tr=350)


def stream(values):
    return AudioStream(np.asarray(values, dtype=np.int64))


def with_marker(length=10000, at=5000, template=None):
    x = np.zeros(length, dtype=np.int64)
    marker = synthesize_marker(template or default_template().scaled(1.1)).samples
    x[at:at + len(marker)] = marker
    return stream(x)


def test_params_validation():
    assert DetectionParams() == OPTIMAL
    for bad in ({"a": 0}, {"t": 0}, {"p": 0}, {"p": 101}, {"tr": 10}):
        with pytest.raises(ValueError):
            DetectionParams(**bad)


def test_params_config_keys():
    params = DetectionParams.from_config({"threshold_a": "20000", "window_t": "30"})
    assert params == DetectionParams(a=20000, t=30, p=75, tr=350)
    assert DetectionParams.from_config(params.to_config()) == params


# -- window test -----------------------------------------------------------------

def test_window_all_high():
    assert is_marker_window(stream([30000] * 50), 0, OPTIMAL)


def test_window_all_zero():
    assert not is_marker_window(stream([0] * 50), 0, OPTIMAL)


def test_window_single_sign_change():
    assert is_marker_window(stream([30000] * 25 + [-30000] * 25), 0, OPTIMAL)


def test_window_alternating():
    x = [30000 if k % 2 == 0 else -30000 for k in range(50)]
    assert not is_marker_window(stream(x), 0, OPTIMAL)


def test_window_zero_carries_sign():
    x = [30000] * 20 + [0] * 5 + [30000] * 25
    assert is_marker_window(stream(x), 0, OPTIMAL)
    x = [30000] * 20 + [0] * 5 + [-30000] * 25
    assert is_marker_window(stream(x), 0, OPTIMAL)


def test_window_percentage_boundary():
    # 38 of 50 above is 76%, 37 is 74%
    assert is_marker_window(stream([30000] * 38 + [100] * 12), 0, OPTIMAL)
    assert not is_marker_window(stream([30000] * 37 + [100] * 13), 0, OPTIMAL)
    # exactly 75%: 3 of 4 with t=4
    assert is_marker_window(stream([30000] * 3 + [1]), 0, DetectionParams(t=4, tr=10))


def test_window_bounds():
    with pytest.raises(WindowOutOfBounds):
        is_marker_window(stream([30000] * 49), 0, OPTIMAL)
    with pytest.raises(WindowOutOfBounds):
        is_marker_window(stream([30000] * 60), -1, OPTIMAL)


# -- scanner -------------------------------------------------------------------

def test_all_zero_stream():
    result = detect_markers(stream(np.zeros(10000)), OPTIMAL)
    assert result.positions == []
    assert result.op_count == 10000 - 50 + 1
    assert result.candidates_evaluated == 0


def test_single_marker_found_at_start():
    s = with_marker()
    result = detect_markers(s, OPTIMAL)
    assert result.positions == [5000]
    # exhaustive check of the acceptance definition at every index
    accepted = [i for i in range(len(s) - 49) if abs(int(s.samples[i])) > 27000
                and is_marker_window(s, i, OPTIMAL)]
    assert accepted[0] == 5000
    assert all(i < 5000 + 350 for i in accepted)


def test_unscaled_default_marker_is_missed():
    assert detect_markers(with_marker(template=default_template()), OPTIMAL).positions == []


def test_short_stream():
    result = detect_markers(stream([30000] * 10), OPTIMAL)
    assert result.positions == [] and result.op_count == 0


def test_empty_stream():
    result = detect_markers(stream([]), OPTIMAL)
    assert result.positions == [] and result.stream_len == 0


def test_count_candidates():
    assert count_candidates(stream(np.zeros(1000)), OPTIMAL) == 0
    assert count_candidates(with_marker(), OPTIMAL) == 1
    rng = np.random.default_rng(11)
    clipped = stream(np.clip(rng.integers(-32768, 32768, 20000), -26000, 26000))
    assert count_candidates(clipped, OPTIMAL) == 0


def test_minus_full_scale_counts_as_high():
    x = np.full(60, -32768)
    assert detect_markers(stream(x), OPTIMAL).positions == [0]


def test_marker_at_stream_end_skip_clipped():
    s = with_marker(length=5000 + 200, at=5000)
    result = detect_markers(s, OPTIMAL)
    assert result.positions == [5000]
    positions, candidates, ops = brute_force_detect(s.samples, 27000, 50, 75, 350)
    assert result.op_count == ops


# -- properties ------------------------------------------------------------------

def random_stream(draw_values, length):
    return stream(np.asarray(draw_values[:length]))


sample_values = st.one_of(
    st.integers(-32768, 32767),
    st.sampled_from([0, 27000, 27001, -27001, 30000, -30000, 500, -500]),
)
params_strategy = st.builds(
    lambda a, t, p, extra: DetectionParams(a=a, t=t, p=p, tr=t + extra),
    a=st.integers(1, 32000), t=st.integers(1, 12), p=st.integers(1, 100), extra=st.integers(0, 20),
)


@settings(max_examples=300, deadline=None)
@given(values=st.lists(sample_values, max_size=200), params=params_strategy)
def test_matches_brute_force(values, params):
    s = stream(values)
    result = detect_markers(s, params)
    positions, candidates, ops = brute_force_detect(values, params.a, params.t, params.p, params.tr)
    assert result.positions == positions
    assert result.candidates_evaluated == candidates
    assert result.op_count == ops


@settings(max_examples=200, deadline=None)
@given(values=st.lists(sample_values, max_size=200), params=params_strategy)
def test_result_invariants(values, params):
    s = stream(values)
    result = detect_markers(s, params)
    pos = result.positions
    assert all(b - a > params.tr for a, b in zip(pos, pos[1:]))
    assert result.candidates_accepted == len(pos) <= result.candidates_evaluated
    assert all(abs(values[i]) > params.a for i in pos)
    # polarity invariance (-32768 has no positive twin, so clip first)
    clipped = np.clip(np.asarray(values, dtype=np.int64), -32767, 32767)
    flipped = detect_markers(stream(-clipped), params)
    assert flipped.positions == detect_markers(stream(clipped), params).positions
    assert detect_markers(s, params) == result


@settings(max_examples=200, deadline=None)
@given(values=st.lists(sample_values, max_size=200), params=params_strategy,
       bump=st.integers(0, 5000))
def test_raising_threshold_never_adds_hot_samples(values, params, bump):
    higher = DetectionParams(a=min(32767, params.a + bump), t=params.t, p=params.p, tr=params.tr)
    mags = np.abs(np.asarray(values, dtype=np.int64))
    assert np.count_nonzero(mags > higher.a) <= np.count_nonzero(mags > params.a)
    if not detect_markers(stream(values), params).positions:
        # without acceptances there is no skip, so candidates are just hot samples
        assert count_candidates(stream(values), higher) <= count_candidates(stream(values), params)


def test_raising_threshold_can_add_candidates():
    # a rejected window no longer skips ahead, exposing later hot samples
    x = [30000, 28000, 30000, 30000, 30000, 0, 0]
    low = DetectionParams(a=27000, t=2, p=100, tr=5)
    high = DetectionParams(a=29000, t=2, p=100, tr=5)
    assert count_candidates(stream(x), low) == 1
    assert count_candidates(stream(x), high) == 2
