"""Report figures. Everything renders off-screen to files."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .codec import FULL_SCALE, AudioStream  # noqa: E402
from .segmenter import MARKER, PHONEME, Segment  # noqa: E402

_RC = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}

KIND_COLORS = {PHONEME: "tab:green", MARKER: "tab:red", "silence": "0.85"}


@contextmanager
def report_style():
    with plt.rc_context(_RC):
        yield


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _decimated(samples: np.ndarray, max_points: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Min/max envelope so that long recordings stay cheap to draw."""
    n = len(samples)
    if n <= max_points:
        return np.arange(n), samples
    bucket = int(np.ceil(n / (max_points // 2)))
    trimmed = samples[: n - n % bucket].reshape(-1, bucket)
    x = np.repeat(np.arange(trimmed.shape[0]) * bucket, 2)
    y = np.column_stack([trimmed.min(axis=1), trimmed.max(axis=1)]).ravel()
    return x, y


def plot_segmentation(
    stream: AudioStream,
    segments: Sequence[Segment],
    path: str | Path,
    positions: Iterable[int] = (),
    threshold: int | None = None,
    title: str = "",
) -> Path:
    with report_style():
        fig, ax = plt.subplots()
        x, y = _decimated(stream.samples)
        ax.plot(x / stream.sample_rate, y, lw=0.4, color="0.2")
        for seg in segments:
            if seg.kind == "silence":
                continue
            ax.axvspan(seg.start / stream.sample_rate, seg.end / stream.sample_rate,
                       color=KIND_COLORS[seg.kind], alpha=0.25, lw=0)
        for pos in positions:
            ax.axvline(pos / stream.sample_rate, color="tab:red", lw=0.6)
        if threshold is not None:
            for level in (threshold, -threshold):
                ax.axhline(level, color="tab:orange", ls="--", lw=0.8)
        ax.set_ylim(-FULL_SCALE * 1.05, FULL_SCALE * 1.05)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("amplitude")
        ax.set_title(title)
        return _save(fig, path)


def plot_marker(samples: np.ndarray, path: str | Path, threshold: int | None = None,
                band: float | None = None, window: int | None = None) -> Path:
    with report_style():
        fig, ax = plt.subplots()
        ax.plot(np.arange(len(samples)), samples, marker=".", ms=2, lw=0.8)
        if threshold is not None:
            ax.axhline(threshold, color="tab:orange", ls="--", lw=0.8, label="threshold")
            ax.axhline(-threshold, color="tab:orange", ls="--", lw=0.8)
        if band is not None:
            ax.axhspan(-band * FULL_SCALE, band * FULL_SCALE, color="tab:green", alpha=0.15,
                       label="settle band")
        if window is not None:
            ax.axvspan(0, window, color="tab:blue", alpha=0.08, label="test window")
        ax.set_xlabel("sample")
        ax.set_ylabel("amplitude")
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_complexity(report, path: str | Path, title: str = "") -> Path:
    """Measured op_count vs s with the closed-form prediction and the linear fit."""
    runs = sorted(report.runs, key=lambda r: r.s)
    s = np.array([r.s for r in runs], dtype=float)
    with report_style():
        fig, ax = plt.subplots()
        ax.plot(s, [r.op_count for r in runs], "o", label="measured")
        ax.plot(s, [r.predicted for r in runs], "-", lw=1, label="closed form")
        if report.linear_fit is not None:
            fit = report.linear_fit
            ax.plot(s, fit.slope * s + fit.intercept, "--", lw=1,
                    label=f"fit slope={fit.slope:.4f}, R²={fit.r_squared:.6f}")
        ax.plot(s, s, ":", color="0.5", lw=1, label="s")
        ax.set_xlabel("stream length s [samples]")
        ax.set_ylabel("elementary operations")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_sweep(rows, path: str | Path) -> Path:
    """Recall and precision against window length, one line per (a, p, tr)."""
    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault((row.a, row.p, row.tr), []).append(row)
    with report_style():
        fig, (ax_r, ax_p) = plt.subplots(1, 2, sharex=True, figsize=(10, 4))
        for (a, p, tr), members in sorted(groups.items()):
            members.sort(key=lambda r: r.t)
            t = [r.t for r in members]
            label = f"a={a} p={p:g} tr={tr}"
            ax_r.plot(t, [r.recall for r in members], "o-", label=label)
            ax_p.plot(t, [r.precision for r in members], "o-", label=label)
        ax_r.set_ylabel("recall")
        ax_p.set_ylabel("precision")
        for ax in (ax_r, ax_p):
            ax.set_xlabel("window t [samples]")
            ax.set_ylim(-0.05, 1.05)
        if len(groups) <= 8:
            ax_r.legend(fontsize=8)
        return _save(fig, path)
