"""Switch-transition marker waveform and the recorder state graph."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .codec import DEFAULT_SAMPLE_RATE, FULL_SCALE, AudioStream

# Curvature of the logarithmic tail; larger values drop faster early on.
TAIL_CURVATURE = 0.5


@dataclass(frozen=True)
class MarkerTemplate:
    """Shape of the step-response transient left by the hardware switch.

    ``settle_samples`` counts the whole transition, both high-amplitude
    phases plus the decaying tail. The tail must be at least one sample long
    so that the last sample can sit inside the settle band.
    """

    a1: float = 26000
    a2: float = 23000
    t1: int = 40
    t2: int = 40
    settle_samples: int = 140
    settle_band: float = 0.05
    polarity: int = 1

    def __post_init__(self) -> None:
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("phase durations t1 and t2 must be positive")
        if self.settle_samples <= self.t1 + self.t2:
            raise ValueError("settle_samples must exceed t1 + t2 (the tail needs a sample)")
        if not 0 < self.a2 <= self.a1 <= FULL_SCALE:
            raise ValueError("amplitudes must satisfy 0 < a2 <= a1 <= 32767")
        if not 0 < self.settle_band < 1:
            raise ValueError("settle_band must lie in (0, 1)")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")

    @property
    def tail_samples(self) -> int:
        return self.settle_samples - self.t1 - self.t2

    def scaled(self, factor: float) -> "MarkerTemplate":
        """Multiply both phase amplitudes, saturating at full scale."""
        return replace(
            self,
            a1=min(FULL_SCALE, self.a1 * factor),
            a2=min(FULL_SCALE, self.a2 * factor),
        )

    def to_config(self) -> dict[str, float | int]:
        return asdict(self)

    @classmethod
    def from_config(cls, values: dict) -> "MarkerTemplate":
        kinds = {"a1": float, "a2": float, "t1": int, "t2": int,
                 "settle_samples": int, "settle_band": float, "polarity": int}
        kwargs = {k: kinds[k](v) for k, v in values.items() if k in kinds}
        return cls(**kwargs)


def default_template() -> MarkerTemplate:
    return MarkerTemplate()


def _tail_envelope(start: float, end: float, length: int) -> np.ndarray:
    """Logarithmic decay from ``start`` that lands on ``end`` at the last sample."""
    i = np.arange(1, length + 1, dtype=np.float64)
    k = TAIL_CURVATURE
    if end <= 0:
        horizon = math.log1p(k * length)
        return np.maximum(start * (1 - np.log1p(k * i) / horizon), 0.0)
    if end >= start:
        # already inside the band: fall to zero over a span one sample longer
        horizon = math.log1p(k * (length + 1))
        return start * (1 - np.log1p(k * i) / horizon)
    # choose the zero-crossing horizon so that the curve equals `end` at i == length
    horizon = math.log1p(k * length) / (1 - end / start)
    return start * (1 - np.log1p(k * i) / horizon)


def synthesize_marker(
    template: MarkerTemplate,
    noise_fraction: float = 0.0,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> AudioStream:
    """Render one transition of ``template.settle_samples`` samples.

    Jitter is multiplicative: each sample is scaled by ``1 + u`` where ``u``
    is normal with sigma ``noise_fraction / 4``, clipped to
    ``+-noise_fraction``.
    """
    if not 0 <= noise_fraction < 1:
        raise ValueError("noise_fraction must lie in [0, 1)")
    band = template.settle_band * FULL_SCALE
    # keep the jittered endpoint inside the band
    end_level = math.floor(band / (1 + noise_fraction))
    magnitude = np.concatenate([
        np.full(template.t1, float(template.a1)),
        np.full(template.t2, float(template.a2)),
        _tail_envelope(float(template.a2), end_level, template.tail_samples),
    ])
    if noise_fraction:
        rng = np.random.default_rng(seed)
        jitter = np.clip(
            rng.normal(0.0, noise_fraction / 4, magnitude.size), -noise_fraction, noise_fraction
        )
        magnitude = magnitude * (1 + jitter)
    sign = np.full(magnitude.size, -template.polarity, dtype=np.int64)
    sign[: template.t1] = template.polarity
    samples = np.clip(np.floor(magnitude) * sign, -32768, 32767).astype(np.int16)
    return AudioStream(samples, sample_rate)


class RecorderState(enum.Enum):
    S1 = "S1"    # switch released, microphone shorted, silence
    S2 = "S2"    # voice-activation pause, nothing recorded
    S23 = "S23"  # switch opening transient (opening marker)
    S3 = "S3"    # switch held, microphone live
    S31 = "S31"  # switch closing transient (closing marker)


class RecorderEvent(enum.Enum):
    PRESS = "press"
    RELEASE = "release"
    VCVA_TIMEOUT = "vcva_timeout"
    PAUSE = "pause"
    RESUME = "resume"
    SETTLE = "settle"


class IllegalTransition(ValueError):
    pass


TRANSITIONS: dict[tuple[RecorderState, RecorderEvent], RecorderState] = {
    (RecorderState.S1, RecorderEvent.VCVA_TIMEOUT): RecorderState.S2,
    (RecorderState.S1, RecorderEvent.PRESS): RecorderState.S23,
    (RecorderState.S2, RecorderEvent.PRESS): RecorderState.S23,
    (RecorderState.S23, RecorderEvent.SETTLE): RecorderState.S3,
    (RecorderState.S3, RecorderEvent.RELEASE): RecorderState.S31,
    (RecorderState.S3, RecorderEvent.PAUSE): RecorderState.S1,
    (RecorderState.S1, RecorderEvent.RESUME): RecorderState.S3,
    (RecorderState.S31, RecorderEvent.SETTLE): RecorderState.S1,
}

# States whose entry leaves a marker in the audio.
MARKER_STATES = frozenset({RecorderState.S23, RecorderState.S31})


def step_state(current: RecorderState | str, event: RecorderEvent | str) -> RecorderState:
    current = RecorderState(current)
    event = RecorderEvent(event)
    try:
        return TRANSITIONS[(current, event)]
    except KeyError:
        raise IllegalTransition(f"event {event.value!r} is not allowed in state {current.value}") from None


def run_events(
    events: list[RecorderEvent | str], start: RecorderState = RecorderState.S1
) -> list[RecorderState]:
    """Replay an event trace and return every visited state, ``start`` included."""
    states = [RecorderState(start)]
    for event in events:
        states.append(step_state(states[-1], event))
    return states
