"""Marker detection by amplitude-and-sign windows (ADM).

The scanner walks indices ``0 .. len - t``. A sample whose magnitude exceeds
``a`` is a candidate; its window ``[i, i + t)`` is accepted when at least
``p`` percent of the window exceeds ``a`` and the signal changes sign at most
once. After an acceptance the scanner jumps ``tr`` indices past the loop's
own increment.

Operation counting: every visited outer index costs one inspection and every
candidate evaluation costs ``t`` more. See :mod:`markersplit.analysis` for the
closed forms this yields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import AudioStream


class WindowOutOfBounds(IndexError):
    pass


@dataclass(frozen=True)
class DetectionParams:
    a: int = 27000
    t: int = 50
    p: float = 75
    tr: int = 350

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError("threshold a must be positive")
        if self.t <= 0:
            raise ValueError("window t must be positive")
        if not 0 < self.p <= 100:
            raise ValueError("percentage p must lie in (0, 100]")
        if self.tr < self.t:
            raise ValueError("skip tr must be at least the window t")

    def to_config(self) -> dict[str, float | int]:
        return {"threshold_a": self.a, "window_t": self.t,
                "percent_p": self.p, "skip_tr": self.tr}

    @classmethod
    def from_config(cls, values: dict) -> "DetectionParams":
        defaults = cls()
        return cls(
            a=int(values.get("threshold_a", defaults.a)),
            t=int(values.get("window_t", defaults.t)),
            p=float(values.get("percent_p", defaults.p)),
            tr=int(values.get("skip_tr", defaults.tr)),
        )


@dataclass
class DetectionResult:
    positions: list[int] = field(default_factory=list)
    op_count: int = 0
    candidates_evaluated: int = 0
    candidates_accepted: int = 0
    stream_len: int = 0

    def as_dict(self) -> dict:
        return {
            "positions": list(self.positions),
            "op_count": self.op_count,
            "candidates_evaluated": self.candidates_evaluated,
            "candidates_accepted": self.candidates_accepted,
            "stream_len": self.stream_len,
        }


def _magnitudes(samples: np.ndarray) -> np.ndarray:
    # int32 so that |-32768| does not wrap
    return np.abs(samples.astype(np.int32))


def _accepts(above: int, sign_changes: int, params: DetectionParams) -> bool:
    return above * 100 >= params.p * params.t and sign_changes <= 1


def is_marker_window(stream: AudioStream, start: int, params: DetectionParams) -> bool:
    """Acceptance test for the window ``[start, start + t)``.

    Zero samples carry the previous nonzero sign, so passing through zero
    does not count as a sign change.
    """
    if start < 0 or start + params.t > len(stream):
        raise WindowOutOfBounds(
            f"window [{start}, {start + params.t}) outside stream of {len(stream)} samples"
        )
    window = stream.samples[start:start + params.t].astype(np.int32)
    above = int(np.count_nonzero(np.abs(window) > params.a))
    signs = np.sign(window)
    signs = signs[signs != 0]
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    return _accepts(above, changes, params)


def _sign_change_prefix(samples: np.ndarray) -> np.ndarray:
    """prefix[j] = number of sign changes between positions < j (zeros carry sign)."""
    signs = np.sign(samples.astype(np.int32))
    nonzero = np.flatnonzero(signs)
    carried = np.zeros_like(signs)
    if nonzero.size:
        # forward-fill the last nonzero sign over zero runs
        fill = np.zeros(signs.size, dtype=np.int64)
        fill[nonzero] = nonzero
        fill = np.maximum.accumulate(fill)
        carried = signs[fill]
        carried[: nonzero[0]] = 0
    change = np.zeros(signs.size, dtype=np.int64)
    change[1:] = (carried[1:] != carried[:-1]) & (carried[:-1] != 0)
    return np.concatenate(([0], np.cumsum(change)))


def detect_markers(stream: AudioStream, params: DetectionParams = DetectionParams()) -> DetectionResult:
    n = len(stream)
    t = params.t
    last = n - t
    result = DetectionResult(stream_len=n)
    if last < 0:
        return result

    magnitude = _magnitudes(stream.samples)
    hot = magnitude > params.a
    above_prefix = np.concatenate(([0], np.cumsum(hot, dtype=np.int64)))
    change_prefix = _sign_change_prefix(stream.samples)

    skipped = 0
    resume_at = 0
    for i in np.flatnonzero(hot[: last + 1]).tolist():
        if i < resume_at:
            continue
        result.candidates_evaluated += 1
        above = int(above_prefix[i + t] - above_prefix[i])
        # changes strictly inside the window: transitions landing on i+1 .. i+t-1
        changes = int(change_prefix[i + t] - change_prefix[i + 1])
        if _accepts(above, changes, params):
            result.positions.append(i)
            skipped += min(params.tr, last - i)
            resume_at = i + params.tr + 1

    result.candidates_accepted = len(result.positions)
    result.op_count = (last + 1 - skipped) + result.candidates_evaluated * t
    return result


def count_candidates(stream: AudioStream, params: DetectionParams = DetectionParams()) -> int:
    """Number of window tests the scanner performs, skip rule included."""
    return detect_markers(stream, params).candidates_evaluated
