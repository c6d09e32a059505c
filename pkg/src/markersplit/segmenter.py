"""Split a recording into phoneme, silence and marker segments."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adm import DetectionResult
from .codec import FULL_SCALE, AudioStream, write_stream

PHONEME = "phoneme"
SILENCE = "silence"
MARKER = "marker"
KINDS = (PHONEME, SILENCE, MARKER)

DEFAULT_MARKER_LEN = 350


class MarkerOverlap(ValueError):
    pass


class IoFailure(OSError):
    pass


class OddMarkerCount(UserWarning):
    """Markers should come in open/close pairs; an odd count means a cut recording."""


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    kind: str
    index: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not 0 <= self.start < self.end:
            raise ValueError(f"empty or negative segment [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def as_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "kind": self.kind, "index": self.index}


@dataclass(frozen=True)
class SilenceParams:
    # mirrors the 5% settle band of the marker transient
    max_abs: int = int(0.05 * FULL_SCALE)
    min_len: int = 16000

    def __post_init__(self) -> None:
        if self.max_abs < 0:
            raise ValueError("max_abs must be non-negative")
        if self.min_len < 1:
            raise ValueError("min_len must be at least 1")


def longest_quiet_run(samples: np.ndarray, max_abs: int) -> int:
    """Length of the longest run of samples with ``|x| <= max_abs``."""
    if not samples.size:
        return 0
    loud = np.abs(samples.astype(np.int32)) > max_abs
    edges = np.flatnonzero(np.diff(np.concatenate(([True], loud, [True])).astype(np.int8)))
    # edges come in (quiet start, quiet end) pairs
    if not edges.size:
        return 0
    return int((edges[1::2] - edges[0::2]).max())


def segment_stream(
    stream: AudioStream,
    markers: DetectionResult | Sequence[int],
    marker_len: int = DEFAULT_MARKER_LEN,
    silence: SilenceParams = SilenceParams(),
) -> list[Segment]:
    """Label the whole stream, leaving no gaps.

    Every marker covers ``[m, m + marker_len)``. Each stretch between markers
    is silence if it holds a quiet run of at least ``silence.min_len``
    samples and a phoneme otherwise, so short pauses stay inside a phoneme.
    """
    if marker_len < 1:
        raise ValueError("marker_len must be at least 1")
    positions = list(markers.positions if isinstance(markers, DetectionResult) else markers)
    n = len(stream)
    for prev, cur in zip(positions, positions[1:]):
        if cur - prev < marker_len:
            raise MarkerOverlap(f"markers at {prev} and {cur} are closer than {marker_len}")
    if positions and (positions[0] < 0 or positions[-1] >= n):
        raise ValueError("marker position outside the stream")
    if len(positions) % 2:
        warnings.warn(
            f"{len(positions)} markers detected; the recording may end mid-phoneme",
            OddMarkerCount,
            stacklevel=2,
        )

    spans: list[tuple[int, int, str]] = []
    cursor = 0
    for pos in positions:
        spans.append((cursor, pos, ""))
        spans.append((pos, min(pos + marker_len, n), MARKER))
        cursor = min(pos + marker_len, n)
    spans.append((cursor, n, ""))

    counters = dict.fromkeys(KINDS, 0)
    segments = []
    for start, end, kind in spans:
        if end <= start:
            continue
        if not kind:
            quiet = longest_quiet_run(stream.samples[start:end], silence.max_abs)
            kind = SILENCE if quiet >= silence.min_len else PHONEME
        segments.append(Segment(start, end, kind, counters[kind]))
        counters[kind] += 1
    return segments


def export_segments(
    stream: AudioStream,
    segments: Iterable[Segment],
    directory: str | Path,
    kinds: Iterable[str] | None = (PHONEME,),
    pattern: str = "{kind}_{n:03d}.wav",
) -> list[Path]:
    """Write each selected segment as a PCM16 WAV named by ``pattern``.

    ``pattern`` may use ``{n}`` (ordinal within the kind) and ``{kind}``.
    Passing ``kinds=None`` exports every segment.
    """
    selected = [s for s in segments if kinds is None or s.kind in set(kinds)]
    if not selected:
        return []
    directory = Path(directory)
    paths = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for seg in selected:
            path = directory / pattern.format(n=seg.index, kind=seg.kind)
            write_stream(path, stream.slice(seg.start, seg.end))
            paths.append(path)
    except OSError as exc:
        raise IoFailure(f"could not export segments to {directory}: {exc}") from exc
    return paths
