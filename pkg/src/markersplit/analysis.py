"""Operation-count validation of the detector and parameter sweeps.

Counting rule (the contract :func:`markersplit.adm.detect_markers` obeys):

* one elementary operation is one sample inspection;
* the scan visits indices ``0 .. s - t``, one operation each, so a stream
  with no candidates costs ``s - t + 1``;
* every candidate evaluation inspects ``t`` window samples;
* an accepted candidate skips the next ``tr`` indices, so it nets
  ``t - tr`` against the plain scan.

Hence with ``m`` accepted and ``k`` rejected candidates (all skips inside the
scan range) the count is ``s - t + 1 - m (tr - t) + k t``. The best-case
closed form ``s - m (tr - t)`` is therefore exact up to the constant
``1 - t``, and each rejected candidate adds exactly ``t``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .adm import DetectionParams, detect_markers
from .codec import AudioStream
from .marker import MarkerTemplate, default_template, synthesize_marker
from .synthgen import GroundTruth, RecordingScript, evaluate_detection, generate_recording

COUNTING_RULE = (
    "one operation = one sample inspection; each visited scan index costs 1 "
    "(indices 0 .. s-t); each candidate evaluation costs t; an accepted candidate "
    "skips the next tr indices"
)


class ConstructionFailed(RuntimeError):
    pass


class InsufficientSizes(ValueError):
    pass


class EmptyGrid(ValueError):
    pass


def op_count_semantics() -> str:
    return COUNTING_RULE


def loop_bound_constant(params: DetectionParams) -> int:
    return 1 - params.t


def best_case_ops(s: int, m: int, params: DetectionParams) -> int:
    """Closed form ``s - m (tr - t)`` as printed, without the loop-bound constant."""
    return s - m * (params.tr - params.t)


def best_case_ops_fraction(s: int, a: float, params: DetectionParams) -> float:
    """``s [1 - a (tr - t)]`` with ``a = m / s``."""
    return s * (1 - a * (params.tr - params.t))


def additive_worst_ops(s: int, c: int, params: DetectionParams) -> int:
    """Exact count when all ``c`` candidates are rejected."""
    return (s - params.t + 1) + c * params.t


def literal_worst_ops(s: int, c: int, params: DetectionParams) -> int:
    """The multiplicative worst-case form ``s * c * t``, kept for comparison."""
    return s * c * params.t


def literal_worst_ops_fraction(s: int, b: float, params: DetectionParams) -> float:
    """``s^2 * b * t`` with ``b = c / s``."""
    return s * s * b * params.t


@dataclass
class ComplexityRun:
    s: int
    m: int
    c: int
    op_count: int
    predicted: int
    literal: float | None = None

    @property
    def residual(self) -> int:
        return self.op_count - self.predicted


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class ComplexityReport:
    runs: list[ComplexityRun] = field(default_factory=list)
    best_case_residuals: list[int] = field(default_factory=list)
    fitted_a: float = 0.0
    fitted_b: float = 0.0
    linear_fit: LinearFit | None = None
    note: str = ""

    def rows(self) -> list[dict]:
        return [
            {**asdict(run), "residual": run.residual, "a_ratio": run.m / run.s if run.s else 0.0,
             "b_ratio": run.c / run.s if run.s else 0.0}
            for run in self.runs
        ]

    def summary(self) -> dict:
        return {
            "runs": len(self.runs),
            "best_case_residuals": self.best_case_residuals,
            "fitted_a": self.fitted_a,
            "fitted_b": self.fitted_b,
            "linear_fit": asdict(self.linear_fit) if self.linear_fit else None,
            "note": self.note,
            "counting_rule": COUNTING_RULE,
        }


def _finish(report: ComplexityReport) -> ComplexityReport:
    total_s = sum(r.s for r in report.runs)
    if total_s:
        report.fitted_a = sum(r.m for r in report.runs) / total_s
        report.fitted_b = sum(r.c for r in report.runs) / total_s
    return report


def accepted_marker_stream(
    s: int,
    m: int,
    params: DetectionParams = DetectionParams(),
    template: MarkerTemplate | None = None,
) -> AudioStream:
    """Silence carrying ``m`` clean markers spaced so that every skip stays in range."""
    template = template or default_template().scaled(1.1)
    marker = synthesize_marker(template).samples
    last = s - params.t
    pitch = max(params.tr + 1, len(marker) + 1)
    if m and (m - 1) * pitch + params.tr > last:
        raise ConstructionFailed(f"{m} markers do not fit a stream of {s} samples")
    samples = np.zeros(s, dtype=np.int16)
    if m:
        # spread markers evenly over the usable range
        span = last - params.tr
        starts = np.linspace(0, span, m).astype(int) if m > 1 else np.array([span // 2])
        for start in starts:
            samples[start:start + len(marker)] = marker[: s - start]
    return AudioStream(samples)


def rejected_stream(s: int, params: DetectionParams = DetectionParams(), density: float = 1.0,
                    block: int = 500) -> AudioStream:
    """Sign-alternating stream; a ``density`` share of each block pair sits above ``a``.

    Every window holds many sign changes, so every candidate is rejected.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    high = min(32767, params.a + 3000)
    if high <= params.a:
        raise ConstructionFailed(f"no 16-bit amplitude exceeds a={params.a}")
    level = np.full(s, 100, dtype=np.int32)
    if density == 1:
        level[:] = high
    else:
        period = int(round(block / density))
        hot = (np.arange(s) % period) < block
        level[hot] = high
    alternate = np.where(np.arange(s) % 2, -1, 1)
    return AudioStream((level * alternate).astype(np.int16))


def verify_best_case(
    cases: Iterable[tuple[int, int]], params: DetectionParams = DetectionParams()
) -> ComplexityReport:
    report = ComplexityReport(note="residual = op_count - [s - m(tr - t)]; expected 1 - t")
    for s, m in cases:
        result = detect_markers(accepted_marker_stream(s, m, params), params)
        if result.candidates_evaluated != result.candidates_accepted or result.candidates_accepted != m:
            raise ConstructionFailed(
                f"s={s}, m={m}: {result.candidates_evaluated} candidates, "
                f"{result.candidates_accepted} accepted"
            )
        run = ComplexityRun(s, m, result.candidates_evaluated, result.op_count,
                            best_case_ops(s, m, params))
        report.runs.append(run)
        report.best_case_residuals.append(run.residual)
    return _finish(report)


def verify_worst_case(
    sizes: Iterable[int], params: DetectionParams = DetectionParams(), density: float = 1.0
) -> ComplexityReport:
    report = ComplexityReport(
        note="predicted = (s - t + 1) + c t; literal = s c t (multiplicative form, does not "
             "match the per-candidate excess of t)"
    )
    for s in sizes:
        result = detect_markers(rejected_stream(s, params, density), params)
        if result.candidates_accepted:
            raise ConstructionFailed(f"s={s}: {result.candidates_accepted} candidates accepted")
        c = result.candidates_evaluated
        report.runs.append(ComplexityRun(s, 0, c, result.op_count,
                                         additive_worst_ops(s, c, params),
                                         literal_worst_ops(s, c, params)))
    return _finish(report)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return LinearFit(float(slope), float(intercept), r2)


def recording_of_length(script: RecordingScript, length: int) -> tuple[AudioStream, GroundTruth]:
    """Generate with enough phonemes to cover ``length`` samples, then truncate."""
    cycle = (script.phoneme_len_range[0] + script.silence_len_range[0]
             + 2 * script.template.settle_samples)
    count = max(script.phoneme_count, math.ceil(length / cycle) + 1)
    stream, truth = generate_recording(replace(script, phoneme_count=count))
    truth = GroundTruth(
        marker_positions=[p for p in truth.marker_positions if p < length],
        phoneme_spans=[sp for sp in truth.phoneme_spans if sp[1] <= length],
        state_trace=[st for st in truth.state_trace if st[0] < length],
        anomalies=[an for an in truth.anomalies if an[0] < length],
    )
    return stream.slice(0, length), truth


def fit_linear_complexity(
    sizes: Sequence[int],
    script: RecordingScript = RecordingScript(),
    params: DetectionParams = DetectionParams(),
) -> ComplexityReport:
    """Regress op_count on s over prefixes of one realistic recording."""
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 4 or sizes[0] <= 0 or sizes[-1] < 8 * sizes[0]:
        raise InsufficientSizes("need at least 4 sizes spanning an 8x range")
    stream, _ = recording_of_length(script, sizes[-1])
    report = ComplexityReport(note="op_count vs s on prefixes of a synthetic recording")
    for s in sizes:
        result = detect_markers(stream.slice(0, s), params)
        run = ComplexityRun(s, result.candidates_accepted, result.candidates_evaluated,
                            result.op_count, best_case_ops(s, result.candidates_accepted, params))
        report.runs.append(run)
        report.best_case_residuals.append(run.residual)
    report.linear_fit = linear_fit([r.s for r in report.runs], [r.op_count for r in report.runs])
    return _finish(report)


@dataclass
class SweepRow:
    a: int
    t: int
    p: float
    tr: int
    recall: float
    precision: float
    op_count: int
    candidates: int
    detected: int


def parameter_sweep(
    grid: dict[str, Sequence],
    corpus: Sequence[tuple[AudioStream, GroundTruth]],
    tolerance: int = 5,
) -> list[SweepRow]:
    """Evaluate every combination in ``grid`` (keys ``a``, ``t``, ``p``, ``tr``).

    Missing keys fall back to the defaults. Recall and precision are pooled
    over the corpus. Rows come back sorted by ``(t, a, p, tr)`` so precision
    can be read off per window length.
    """
    defaults = DetectionParams()
    axes = {k: list(grid.get(k, [getattr(defaults, k)])) for k in ("a", "t", "p", "tr")}
    unknown = set(grid) - set(axes)
    if unknown:
        raise ValueError(f"unknown grid keys {sorted(unknown)}")
    if any(not values for values in axes.values()):
        raise EmptyGrid("every grid axis needs at least one value")
    rows = []
    for a, t, p, tr in itertools.product(axes["a"], axes["t"], axes["p"], axes["tr"]):
        params = DetectionParams(a=int(a), t=int(t), p=float(p), tr=int(tr))
        matched = truths = found = ops = cands = 0
        for stream, truth in corpus:
            result = detect_markers(stream, params)
            ev = evaluate_detection(truth, result, tolerance)
            matched += ev.matched
            truths += ev.true_count
            found += ev.detected_count
            ops += result.op_count
            cands += result.candidates_evaluated
        rows.append(SweepRow(params.a, params.t, params.p, params.tr,
                             matched / truths if truths else 1.0,
                             matched / found if found else 1.0,
                             ops, cands, found))
    rows.sort(key=lambda r: (r.t, r.a, r.p, r.tr))
    return rows


def make_corpus(script: RecordingScript, sessions: int) -> list[tuple[AudioStream, GroundTruth]]:
    return [generate_recording(replace(script, seed=script.seed + k)) for k in range(sessions)]


def to_csv(rows: Iterable[dict | object]) -> str:
    rows = [r if isinstance(r, dict) else asdict(r) for r in rows]
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def to_json(data: object) -> str:
    return json.dumps(data, indent=2, default=lambda o: asdict(o) if hasattr(o, "__dataclass_fields__") else str(o)) + "\n"
