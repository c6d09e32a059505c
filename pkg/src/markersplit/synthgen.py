"""Synthetic switch-marked recordings with ground truth.

A recording is produced by walking the recorder state graph: silence (S1,
optionally S2), opening marker (S23), phoneme (S3), closing marker (S31),
and so on. Phonemes are harmonic bursts; only their amplitude statistics
matter to the detector.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .adm import DetectionResult
from .codec import DEFAULT_SAMPLE_RATE, FULL_SCALE, AudioStream, write_stream
from .marker import (
    MarkerTemplate,
    RecorderEvent,
    RecorderState,
    default_template,
    step_state,
    synthesize_marker,
)

EARLY_PRESS = "early_press"
PAUSE = "pause"


@dataclass(frozen=True)
class RecordingScript:
    phoneme_count: int = 5
    phoneme_len_range: tuple[int, int] = (3200, 12800)
    silence_len_range: tuple[int, int] = (16800, 20000)
    phoneme_amplitude: float = 0.8
    noise_floor: int = 200
    marker_noise: float = 0.05
    marker_scale: float = 1.1
    seed: int = 0
    early_press_rate: float = 0.0
    pause_rate: float = 0.0
    pause_len_range: tuple[int, int] = (1600, 6400)
    vcva_samples: int = 16000
    sample_rate: int = DEFAULT_SAMPLE_RATE
    template: MarkerTemplate = field(default_factory=default_template)

    def __post_init__(self) -> None:
        if self.phoneme_count < 0:
            raise ValueError("phoneme_count must be non-negative")
        for name in ("phoneme_len_range", "silence_len_range", "pause_len_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be a nonempty positive range, got {(lo, hi)}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if not 0 < self.phoneme_amplitude <= 1:
            raise ValueError("phoneme_amplitude must lie in (0, 1]")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be non-negative")
        for name in ("early_press_rate", "pause_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")
        if self.marker_scale <= 0:
            raise ValueError("marker_scale must be positive")

    @property
    def marker_template(self) -> MarkerTemplate:
        return self.template.scaled(self.marker_scale)

    def to_config(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "template":
                out.update(value.to_config())
            elif isinstance(value, tuple):
                out[f.name.replace("_range", "_min")] = value[0]
                out[f.name.replace("_range", "_max")] = value[1]
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_config(cls, values: dict) -> "RecordingScript":
        kwargs: dict = {}
        defaults = cls()
        for f in fields(cls):
            if f.name == "template":
                kwargs["template"] = MarkerTemplate.from_config(values)
                continue
            default = getattr(defaults, f.name)
            if isinstance(default, tuple):
                stem = f.name.replace("_range", "")
                lo = int(values.get(f"{stem}_min", default[0]))
                hi = int(values.get(f"{stem}_max", default[1]))
                kwargs[f.name] = (lo, hi)
            elif f.name in values:
                kwargs[f.name] = type(default)(values[f.name])
        return cls(**kwargs)


@dataclass
class GroundTruth:
    marker_positions: list[int] = field(default_factory=list)
    phoneme_spans: list[tuple[int, int]] = field(default_factory=list)
    state_trace: list[tuple[int, RecorderState]] = field(default_factory=list)
    anomalies: list[tuple[int, str]] = field(default_factory=list)

    def events(self) -> list[tuple[int, str]]:
        """All annotations as (index, type) pairs in index order."""
        rows = [(i, "marker") for i in self.marker_positions]
        for start, end in self.phoneme_spans:
            rows += [(start, "phoneme_start"), (end, "phoneme_end")]
        rows += [(i, f"state:{s.value}") for i, s in self.state_trace]
        rows += [(i, f"anomaly:{a}") for i, a in self.anomalies]
        return sorted(rows, key=lambda r: r[0])

    def to_text(self) -> str:
        return "".join(f"{i}\t{kind}\n" for i, kind in self.events())

    @classmethod
    def from_text(cls, text: str) -> "GroundTruth":
        truth = cls()
        open_start = None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                index_text, kind = line.split(None, 1)
                index = int(index_text)
            except ValueError:
                raise ValueError(f"ground truth line {lineno}: expected '<index> <type>'") from None
            if kind == "marker":
                truth.marker_positions.append(index)
            elif kind == "phoneme_start":
                open_start = index
            elif kind == "phoneme_end":
                if open_start is None:
                    raise ValueError(f"ground truth line {lineno}: phoneme_end without start")
                truth.phoneme_spans.append((open_start, index))
                open_start = None
            elif kind.startswith("state:"):
                truth.state_trace.append((index, RecorderState(kind[6:])))
            elif kind.startswith("anomaly:"):
                truth.anomalies.append((index, kind[8:]))
            else:
                raise ValueError(f"ground truth line {lineno}: unknown type {kind!r}")
        return truth

    def to_json(self) -> dict:
        return {
            "marker_positions": self.marker_positions,
            "phoneme_spans": [list(s) for s in self.phoneme_spans],
            "state_trace": [[i, s.value] for i, s in self.state_trace],
            "anomalies": [list(a) for a in self.anomalies],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GroundTruth":
        return cls(
            marker_positions=[int(i) for i in data["marker_positions"]],
            phoneme_spans=[(int(a), int(b)) for a, b in data["phoneme_spans"]],
            state_trace=[(int(i), RecorderState(s)) for i, s in data.get("state_trace", [])],
            anomalies=[(int(i), str(a)) for i, a in data.get("anomalies", [])],
        )

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_json(json.loads(text))
        return cls.from_text(text)


def _harmonic_burst(
    rng: np.random.Generator, length: int, peak: float, noise_floor: int, rate: int
) -> np.ndarray:
    n = np.arange(length) / rate
    f0 = rng.uniform(200.0, 600.0)
    usable = [h for h in range(1, 21) if h * f0 <= 4000.0]
    count = int(rng.integers(2, min(5, len(usable)) + 1))
    harmonics = np.sort(rng.choice(usable, size=count, replace=False))
    wave = np.zeros(length)
    for h in harmonics:
        wave += rng.uniform(0.3, 1.0) / h * np.sin(2 * np.pi * h * f0 * n + rng.uniform(0, 2 * np.pi))
    ramp = max(1, length // 10)
    envelope = np.ones(length)
    envelope[:ramp] = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, ramp + 2)[1:-1])
    envelope[-ramp:] = envelope[:ramp][::-1]
    wave *= envelope
    if noise_floor and np.abs(wave).max() > 0:
        wave = wave / np.abs(wave).max() * peak
        wave += rng.uniform(-noise_floor, noise_floor, length)
    top = np.abs(wave).max()
    if top > 0:
        wave *= peak / top
    limit = np.floor(peak)
    return np.clip(np.round(wave), -limit, limit)


def _noise(rng: np.random.Generator, length: int, noise_floor: int) -> np.ndarray:
    if noise_floor == 0:
        return np.zeros(length)
    return rng.integers(-noise_floor, noise_floor + 1, length).astype(np.float64)


def generate_recording(script: RecordingScript = RecordingScript()) -> tuple[AudioStream, GroundTruth]:
    """Render a recording and its annotations; identical scripts give identical output."""
    rng = np.random.default_rng(script.seed)
    rate = script.sample_rate
    template = script.marker_template
    truth = GroundTruth()
    pieces: list[np.ndarray] = []
    cursor = 0
    state = RecorderState.S1

    def emit(chunk: np.ndarray) -> None:
        nonlocal cursor
        pieces.append(chunk)
        cursor += len(chunk)

    def enter(event: RecorderEvent) -> None:
        nonlocal state
        state = step_state(state, event)
        truth.state_trace.append((cursor, state))

    def marker(polarity: int) -> None:
        truth.marker_positions.append(cursor)
        shaped = MarkerTemplate(**{**asdict(template), "polarity": polarity})
        seed = int(rng.integers(2**32))
        emit(synthesize_marker(shaped, script.marker_noise, seed, rate).samples.astype(np.float64))

    def silence(early: bool) -> None:
        lo, hi = script.silence_len_range
        if early:
            length = int(rng.integers(min(lo, 2000), max(min(lo, 2000), script.vcva_samples - 1) + 1))
        else:
            length = int(rng.integers(lo, hi + 1))
        if length >= script.vcva_samples:
            emit(_noise(rng, script.vcva_samples, script.noise_floor))
            enter(RecorderEvent.VCVA_TIMEOUT)
            emit(_noise(rng, length - script.vcva_samples, script.noise_floor))
        else:
            emit(_noise(rng, length, script.noise_floor))

    truth.state_trace.append((0, state))
    peak_cap = script.phoneme_amplitude * FULL_SCALE
    for _ in range(script.phoneme_count):
        early = rng.random() < script.early_press_rate
        paused = rng.random() < script.pause_rate
        if early:
            truth.anomalies.append((cursor, EARLY_PRESS))
        silence(early)

        enter(RecorderEvent.PRESS)
        marker(1)
        enter(RecorderEvent.SETTLE)
        span_start = cursor
        length = int(rng.integers(script.phoneme_len_range[0], script.phoneme_len_range[1] + 1))
        peak = rng.uniform(0.6, 1.0) * peak_cap
        emit(_noise(rng, int(rng.integers(0, 401)), script.noise_floor))
        if paused and length >= 4:
            first = int(rng.integers(length // 4, 3 * length // 4 + 1))
            emit(_harmonic_burst(rng, first, peak, script.noise_floor, rate))
            truth.anomalies.append((cursor, PAUSE))
            enter(RecorderEvent.PAUSE)
            lo, hi = script.pause_len_range
            emit(_noise(rng, int(rng.integers(lo, hi + 1)), script.noise_floor))
            enter(RecorderEvent.RESUME)
            emit(_harmonic_burst(rng, length - first, peak, script.noise_floor, rate))
        else:
            emit(_harmonic_burst(rng, length, peak, script.noise_floor, rate))
        emit(_noise(rng, int(rng.integers(0, 401)), script.noise_floor))
        truth.phoneme_spans.append((span_start, cursor))

        enter(RecorderEvent.RELEASE)
        marker(-1)
        enter(RecorderEvent.SETTLE)
    silence(False)

    samples = np.concatenate(pieces) if pieces else np.zeros(0)
    return AudioStream(samples.astype(np.int16), rate), truth


@dataclass
class DetectionReport:
    recall: float
    precision: float
    position_errors: list[int]
    matched: int
    true_count: int
    detected_count: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_detection(
    truth: GroundTruth | list[int], result: DetectionResult | list[int], tolerance: int = 5
) -> DetectionReport:
    """Greedy one-to-one matching, closest pairs first.

    ``position_errors`` holds ``detected - true`` for each matched pair, in
    true-position order.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    true_pos = sorted(truth.marker_positions if isinstance(truth, GroundTruth) else truth)
    found = sorted(result.positions if isinstance(result, DetectionResult) else result)

    pairs = []
    for d_idx, d in enumerate(found):
        lo = bisect.bisect_left(true_pos, d - tolerance)
        hi = bisect.bisect_right(true_pos, d + tolerance)
        pairs += [(abs(d - true_pos[k]), k, d_idx) for k in range(lo, hi)]
    pairs.sort()
    used_true: dict[int, int] = {}
    used_found: set[int] = set()
    for _, k, d_idx in pairs:
        if k in used_true or d_idx in used_found:
            continue
        used_true[k] = d_idx
        used_found.add(d_idx)

    matched = len(used_true)
    errors = [found[used_true[k]] - true_pos[k] for k in sorted(used_true)]
    return DetectionReport(
        recall=matched / len(true_pos) if true_pos else 1.0,
        precision=matched / len(found) if found else 1.0,
        position_errors=errors,
        matched=matched,
        true_count=len(true_pos),
        detected_count=len(found),
    )


def write_recording(
    directory: str | Path, name: str, stream: AudioStream, truth: GroundTruth, **wav_kwargs
) -> dict[str, Path]:
    """Write ``name.wav`` plus text and JSON ground truth next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "wav": directory / f"{name}.wav",
        "truth_txt": directory / f"{name}.truth.txt",
        "truth_json": directory / f"{name}.truth.json",
    }
    write_stream(paths["wav"], stream, **wav_kwargs)
    paths["truth_txt"].write_text(truth.to_text())
    paths["truth_json"].write_text(json.dumps(truth.to_json(), indent=2) + "\n")
    return paths
