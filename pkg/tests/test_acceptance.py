"""End-to-end acceptance gate. One test per criterion, each at its stated tolerance.

Run just this file with ``pytest tests/test_acceptance.py -m acceptance``; the
terminal summary prints one PASS/FAIL line per criterion.
"""

import itertools

import numpy as np
import pytest

from markersplit.adm import DetectionParams, detect_markers
from markersplit.analysis import fit_linear_complexity, verify_best_case, verify_worst_case
from markersplit.codec import AudioStream, decode_adpcm, encode_adpcm, snr_db
from markersplit.marker import MarkerTemplate, synthesize_marker
from markersplit.segmenter import segment_stream
from markersplit.synthgen import PAUSE, RecordingScript, evaluate_detection, generate_recording

from oracles import brute_force_detect

pytestmark = pytest.mark.acceptance

OPTIMAL = DetectionParams(a=27000, t=50, p=75, tr=350)
FULL_SCALE = 32767


def test_detection_rate(verdict):
    truth_total = matched = 0
    for k in range(20):
        script = RecordingScript(phoneme_count=125, seed=1000 + k)
        stream, truth = generate_recording(script)
        report = evaluate_detection(truth, detect_markers(stream, OPTIMAL), tolerance=5)
        truth_total += report.true_count
        matched += report.matched
    recall = matched / truth_total
    assert verdict(1, recall >= 0.97,
                   f"recall {recall:.4f} over {truth_total} markers (need >= 0.97)")


def test_best_case_formula(verdict):
    cases = [(s, m) for s in (20000, 100000, 400000) for m in (0, 1, 7, 25)]
    report = verify_best_case(cases, OPTIMAL)
    exact = [r.op_count == r.s - OPTIMAL.t + 1 - r.m * (OPTIMAL.tr - OPTIMAL.t) for r in report.runs]
    assert verdict(2, all(exact) and len(exact) >= 10,
                   f"{sum(exact)}/{len(exact)} (s, m) cases exact; "
                   f"residual vs s - m(tr - t) is {set(report.best_case_residuals)}")


def test_worst_case_excess(verdict):
    report = verify_worst_case([1000, 5000, 20000, 100000], OPTIMAL)
    report.runs += verify_worst_case([100000], OPTIMAL, density=0.5).runs
    exact = [r.op_count == (r.s - OPTIMAL.t + 1) + r.c * OPTIMAL.t for r in report.runs]
    worst = max(report.runs, key=lambda r: r.s)
    assert all(r.literal is not None for r in report.runs)
    assert verdict(3, all(exact),
                   f"{sum(exact)}/{len(exact)} runs exact; at s={worst.s} measured {worst.op_count}"
                   f" vs literal s*c*t {worst.literal}")


@pytest.fixture(scope="module")
def linear_report():
    return fit_linear_complexity([100000, 200000, 400000, 800000], RecordingScript(seed=77),
                                 OPTIMAL)


def test_linearity(verdict, linear_report):
    r2 = linear_report.linear_fit.r_squared
    assert verdict(4, r2 >= 0.999, f"R^2 = {r2:.8f} (need >= 0.999)")


def test_coefficients(verdict, linear_report):
    a, b = linear_report.fitted_a, linear_report.fitted_b
    assert verdict(5, a < 0.01 and b < 0.01, f"a = m/s = {a:.2e}, b = c/s = {b:.2e} (need < 0.01)")


def test_codec_quality(verdict):
    rate = 16000
    k = np.arange(rate)
    results = {}
    for freq, level in itertools.product((200, 300, 500, 1000, 2000, 3000, 4000),
                                         (0.5, 0.65, 0.8)):
        # a quarter-sample phase offset keeps the 4 kHz tone off the zero crossings
        x = np.round(level * FULL_SCALE * np.sin(2 * np.pi * freq * (k + 0.25) / rate))
        src = AudioStream(x, rate)
        back = decode_adpcm(encode_adpcm(src), rate).slice(0, len(src))
        results[(freq, level)] = snr_db(src, back)
    worst = min(results, key=results.get)
    failing = sorted({f for (f, _), v in results.items() if v < 30})
    assert verdict(6, not failing,
                   f"min SNR {results[worst]:.2f} dB at {worst[0]} Hz, {worst[1]} FS; "
                   f"below 30 dB at {failing or 'none'} Hz")


def _random_stream(rng):
    n = int(np.exp(rng.uniform(0, np.log(100000))))
    x = rng.normal(0, rng.uniform(100, 8000), n)
    for _ in range(rng.integers(0, 6)):
        # isolated hot bursts, mostly rejected
        start = rng.integers(0, n)
        x[start:start + rng.integers(1, 80)] = rng.choice([-1, 1]) * rng.uniform(26000, 32767)
    for _ in range(rng.integers(0, 4)):
        marker = synthesize_marker(
            MarkerTemplate(polarity=int(rng.choice([-1, 1]))).scaled(rng.uniform(0.95, 1.25)),
            rng.uniform(0, 0.2), int(rng.integers(0, 2**31)))
        start = rng.integers(0, n)
        piece = marker.samples[: n - start]
        x[start:start + len(piece)] = piece
    return np.clip(np.round(x), -32768, 32767).astype(np.int16)


def test_oracle_equivalence(verdict):
    rng = np.random.default_rng(20240607)
    mismatches = []
    for case in range(1000):
        samples = _random_stream(rng)
        if case % 2:
            t = int(rng.integers(5, 80))
            params = DetectionParams(a=int(rng.integers(20000, 32000)), t=t,
                                     p=float(rng.integers(50, 101)), tr=t + int(rng.integers(0, 400)))
        else:
            params = OPTIMAL
        got = detect_markers(AudioStream(samples), params)
        positions, candidates, ops = brute_force_detect(samples, params.a, params.t, params.p,
                                                        params.tr)
        if (got.positions, got.candidates_evaluated, got.op_count) != (positions, candidates, ops):
            mismatches.append(case)
    assert verdict(7, not mismatches,
                   f"{1000 - len(mismatches)}/1000 random streams identical to brute force")


def test_segmentation(verdict):
    problems = []
    for seed in range(10):
        script = RecordingScript(phoneme_count=25, seed=500 + seed)
        stream, truth = generate_recording(script)
        phonemes = [s for s in segment_stream(stream, detect_markers(stream, OPTIMAL))
                    if s.kind == "phoneme"]
        if len(phonemes) != script.phoneme_count:
            problems.append(f"seed {script.seed}: {len(phonemes)} phonemes")
            continue
        for seg, (start, end) in zip(phonemes, truth.phoneme_spans):
            if abs(seg.start - start) > 350 or abs(seg.end - end) > 350:
                problems.append(f"seed {script.seed}: boundary off at {start}")
    pauses = 0
    for seed in range(10):
        script = RecordingScript(phoneme_count=25, seed=900 + seed, pause_rate=0.5)
        stream, truth = generate_recording(script)
        pauses += sum(kind == PAUSE for _, kind in truth.anomalies)
        phonemes = [s for s in segment_stream(stream, detect_markers(stream, OPTIMAL))
                    if s.kind == "phoneme"]
        if len(phonemes) != script.phoneme_count:
            problems.append(f"paused seed {script.seed}: {len(phonemes)} phonemes")
            continue
        for seg, (start, end) in zip(phonemes, truth.phoneme_spans):
            if not (seg.start <= start + 350 and seg.end >= end - 350):
                problems.append(f"paused seed {script.seed}: phoneme at {start} split")
    assert pauses > 0
    assert verdict(8, not problems,
                   f"20 recordings, {pauses} internal pauses, "
                   f"{len(problems)} problems {problems[:3] if problems else ''}".rstrip())
