"""Command-line front end: ``markersplit <command> ...``.

Data goes to files or stdout, diagnostics to stderr. Every command exits 0
on success and 1 on any reported error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .adm import DetectionParams, detect_markers
from .analysis import (
    fit_linear_complexity,
    make_corpus,
    parameter_sweep,
    to_csv,
    to_json,
    verify_best_case,
    verify_worst_case,
)
from .codec import Codec, CodecError, read_wav, snr_db, write_stream
from .config import load_config, merge
from .segmenter import (
    KINDS,
    PHONEME,
    IoFailure,
    MarkerOverlap,
    OddMarkerCount,
    SilenceParams,
    export_segments,
    segment_stream,
)
from .synthgen import GroundTruth, RecordingScript, evaluate_detection, generate_recording, write_recording


def _err(message: str) -> None:
    print(f"markersplit: {message}", file=sys.stderr)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# parameter assembly: flag > config file > built-in default
# ---------------------------------------------------------------------------

def _detection_params(args) -> DetectionParams:
    values = merge(load_config(args.config), {
        "threshold_a": args.threshold_a, "window_t": args.window_t,
        "percent_p": args.percent_p, "skip_tr": args.skip_tr,
    })
    return DetectionParams.from_config(values)


def _silence_params(args) -> tuple[SilenceParams, int]:
    values = merge(load_config(args.config), {
        "max_abs": args.max_abs, "min_len": args.min_len, "marker_len": args.marker_len,
    })
    defaults = SilenceParams()
    silence = SilenceParams(
        max_abs=int(values.get("max_abs", defaults.max_abs)),
        min_len=int(values.get("min_len", defaults.min_len)),
    )
    marker_len = int(values.get("marker_len", _detection_params(args).tr))
    return silence, marker_len


def _script(args) -> RecordingScript:
    values = merge(load_config(args.config), {
        "phoneme_count": args.phoneme_count, "seed": args.seed,
        "marker_scale": args.marker_scale, "marker_noise": args.marker_noise,
        "noise_floor": args.noise_floor, "phoneme_amplitude": args.phoneme_amplitude,
        "pause_rate": args.pause_rate, "early_press_rate": args.early_press_rate,
    })
    return RecordingScript.from_config(values)


def _sessions(args, default: int = 1) -> int:
    if args.sessions is not None:
        return args.sessions
    return int(load_config(args.config).get("sessions", default))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_decode(args) -> int:
    stream, descriptor = read_wav(args.input)
    write_stream(args.output, stream)
    print(f"codec: {descriptor.codec_tag.name}")
    print(f"samples: {len(stream)}")
    print(f"sample_rate: {stream.sample_rate}")
    print(f"duration_s: {stream.duration:.3f}")
    print(f"peak: {stream.peak()}")
    return 0


def cmd_encode(args) -> int:
    stream, _ = read_wav(args.input)
    write_stream(args.output, stream, Codec.IMA_ADPCM, args.block_align)
    decoded, _ = read_wav(args.output)
    snr = snr_db(stream, decoded.slice(0, len(stream))) if stream.peak() else float("inf")
    print(f"samples: {len(stream)}")
    print(f"block_align: {args.block_align}")
    print(f"snr_db: {snr:.2f}")
    return 0


def cmd_detect(args) -> int:
    params = _detection_params(args)
    stream, _ = read_wav(args.input)
    result = detect_markers(stream, params)
    report = {"input": str(args.input), "params": params.to_config(), **result.as_dict()}
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=2) + "\n")
    if args.figure:
        from .plotting import plot_segmentation

        plot_segmentation(stream, [], args.figure, result.positions, params.a,
                          title=f"{len(result.positions)} markers")
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print("position")
        for pos in result.positions:
            print(pos)
    print(f"{len(result.positions)} markers, {result.candidates_evaluated} candidates, "
          f"op_count {result.op_count}", file=sys.stderr)
    return 0


def _split_one(input_path: str, outdir: str, args) -> dict:
    params = _detection_params(args)
    silence, marker_len = _silence_params(args)
    stream, _ = read_wav(input_path)
    result = detect_markers(stream, params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OddMarkerCount)
        segments = segment_stream(stream, result, marker_len, silence)
    kinds = [PHONEME] if args.kinds is None else args.kinds.split(",")
    paths = export_segments(stream, segments, outdir, kinds, args.pattern)
    manifest = {
        "input": str(input_path),
        "sample_rate": stream.sample_rate,
        "samples": len(stream),
        "params": {**params.to_config(), "max_abs": silence.max_abs, "min_len": silence.min_len,
                   "marker_len": marker_len},
        "markers": result.positions,
        "segments": [s.as_dict() for s in segments],
        "files": [str(p) for p in paths],
        "warnings": [str(w.message) for w in caught],
    }
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out / "segments.csv").write_text(to_csv([s.as_dict() for s in segments]))
    if args.figures:
        from .plotting import plot_segmentation

        plot_segmentation(stream, segments, out / "segmentation.png", result.positions, params.a,
                          title=Path(input_path).name)
    return manifest


def cmd_split(args) -> int:
    inputs = list(args.inputs)
    if len(inputs) == 1:
        jobs = [(inputs[0], args.outdir)]
    else:
        jobs = [(p, str(Path(args.outdir) / Path(p).stem)) for p in inputs]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            manifests = list(pool.map(_split_one, *zip(*jobs), [args] * len(jobs)))
    else:
        manifests = [_split_one(src, dst, args) for src, dst in jobs]

    for manifest in manifests:
        phonemes = [s for s in manifest["segments"] if s["kind"] == PHONEME]
        print(f"{manifest['input']}: {len(manifest['markers'])} markers, {len(phonemes)} phonemes")
        for seg in manifest["segments"]:
            print(f"  {seg['kind']:<8} {seg['index']:>4} [{seg['start']}, {seg['end']})")
        for message in manifest["warnings"]:
            _err(f"warning: {manifest['input']}: {message}")
        if not phonemes:
            _err(f"warning: {manifest['input']}: no phoneme segments found")
    return 0


def cmd_synth(args) -> int:
    script = _script(args)
    codec = Codec.IMA_ADPCM if args.codec == "adpcm" else Codec.PCM16
    out = Path(args.outdir)
    sessions = _sessions(args)
    for k in range(sessions):
        seeded = RecordingScript.from_config({**script.to_config(), "seed": script.seed + k})
        stream, truth = generate_recording(seeded)
        name = args.name if sessions == 1 else f"{args.name}_{k:03d}"
        paths = write_recording(out, name, stream, truth, codec=codec)
        print(f"{paths['wav']}: {len(stream)} samples, {len(truth.marker_positions)} markers, "
              f"{len(truth.phoneme_spans)} phonemes")
    (out / "script.json").write_text(json.dumps({**script.to_config(), "sessions": sessions},
                                                indent=2) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    params = _detection_params(args)
    stream, _ = read_wav(args.input)
    truth = GroundTruth.load(args.truth)
    result = detect_markers(stream, params)
    report = evaluate_detection(truth, result, args.tolerance)
    summary = {"input": str(args.input), "params": params.to_config(), "tolerance": args.tolerance,
               **report.as_dict(), "op_count": result.op_count,
               "candidates_evaluated": result.candidates_evaluated}
    if args.outdir:
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "evaluation.json").write_text(json.dumps(summary, indent=2) + "\n")
        row = {k: v for k, v in summary.items() if k not in ("params", "position_errors")}
        (out / "evaluation.csv").write_text(to_csv([{**row, **params.to_config()}]))
    _print_rows([{"recall": report.recall, "precision": report.precision,
                  "matched": report.matched, "true": report.true_count,
                  "detected": report.detected_count}], args.format, summary)
    return 0


def _print_rows(rows: list[dict], fmt: str, summary: object) -> None:
    if fmt == "json":
        print(to_json(summary), end="")
    else:
        print(to_csv(rows), end="")


def cmd_sweep(args) -> int:
    script = _script(args)
    corpus = make_corpus(script, _sessions(args))
    grid = {}
    for key, flag, parse in (("a", args.grid_a, _int_list), ("t", args.grid_t, _int_list),
                             ("p", args.grid_p, _float_list), ("tr", args.grid_tr, _int_list)):
        if flag is not None:
            grid[key] = parse(flag)
    defaults = _detection_params(args)
    for key in ("a", "t", "p", "tr"):
        grid.setdefault(key, [getattr(defaults, key)])
    rows = parameter_sweep(grid, corpus, args.tolerance)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(to_csv(rows))
    summary = {"grid": grid, "sessions": len(corpus), "tolerance": args.tolerance,
               "script": script.to_config(), "rows": rows}
    (out / "sweep.json").write_text(to_json(summary))
    if args.figures:
        from .plotting import plot_sweep

        plot_sweep(rows, out / "sweep.png")
    _print_rows([r.__dict__ for r in rows], args.format, summary)
    return 0


def cmd_bench(args) -> int:
    params = _detection_params(args)
    script = _script(args)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    best_cases = [(s, m) for s in args.sizes for m in (0, 5, 20)]
    reports = {
        "best_case": verify_best_case(best_cases, params),
        "worst_case": verify_worst_case([s // 10 for s in args.sizes], params),
        "linear": fit_linear_complexity(args.sizes, script, params),
    }
    summary = {}
    rows = []
    for name, report in reports.items():
        for row in report.rows():
            rows.append({"experiment": name, **row})
        summary[name] = report.summary()
    (out / "bench.csv").write_text(to_csv(rows))
    (out / "bench.json").write_text(to_json(summary))
    if args.figures:
        from .plotting import plot_complexity

        plot_complexity(reports["linear"], out / "linear.png", "op_count on synthetic recordings")
        plot_complexity(reports["best_case"], out / "best_case.png", "all candidates accepted")
        plot_complexity(reports["worst_case"], out / "worst_case.png", "all candidates rejected")
    _print_rows(rows, args.format, summary)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_detection(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detection")
    g.add_argument("--threshold-a", type=int, help="amplitude threshold A (default 27000)")
    g.add_argument("--window-t", type=int, help="window length T in samples (default 50)")
    g.add_argument("--percent-p", type=float, help="percent of window above A (default 75)")
    g.add_argument("--skip-tr", type=int, help="skip after an accepted marker (default 350)")


def _add_script(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic recording")
    g.add_argument("--phoneme-count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--sessions", type=int)
    g.add_argument("--marker-scale", type=float)
    g.add_argument("--marker-noise", type=float)
    g.add_argument("--noise-floor", type=int)
    g.add_argument("--phoneme-amplitude", type=float)
    g.add_argument("--pause-rate", type=float)
    g.add_argument("--early-press-rate", type=float)


def _add_common(p: argparse.ArgumentParser, figures: bool = False, fmt: bool = False) -> None:
    p.add_argument("--config", help="flat key-value config file")
    if figures:
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       help="skip rendering PNG figures")
    if fmt:
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="format of the report printed to stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markersplit",
        description="Split switch-marked speech recordings into phonemes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="convert PCM16 or IMA-ADPCM WAV to PCM16 WAV")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("encode", help="convert a WAV file to IMA-ADPCM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--block-align", type=int, default=256)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("detect", help="list marker start positions")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="write a JSON report here")
    p.add_argument("--figure", help="render the waveform with markers to this PNG")
    _add_common(p, fmt=True)
    _add_detection(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("split", help="detect, segment and export phonemes")
    p.add_argument("inputs", nargs="+", metavar="input")
    p.add_argument("outdir")
    p.add_argument("--pattern", default="{kind}_{n:03d}.wav")
    p.add_argument("--kinds", help=f"comma list of segment kinds to export ({','.join(KINDS)})")
    p.add_argument("--max-abs", type=int, help="silence amplitude ceiling")
    p.add_argument("--min-len", type=int, help="minimum silence run in samples")
    p.add_argument("--marker-len", type=int, help="samples attributed to each marker")
    p.add_argument("--workers", type=int, default=1, help="parallel workers across input files")
    _add_common(p, figures=True)
    _add_detection(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate synthetic recordings with ground truth")
    p.add_argument("outdir")
    p.add_argument("--name", default="recording")
    p.add_argument("--codec", choices=("pcm16", "adpcm"), default="pcm16")
    _add_common(p)
    _add_script(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="score detection against ground truth")
    p.add_argument("input")
    p.add_argument("truth", help="ground truth (.truth.txt or .truth.json)")
    p.add_argument("--tolerance", type=int, default=5)
    p.add_argument("--outdir")
    _add_common(p, fmt=True)
    _add_detection(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid search detection parameters on a synthetic corpus")
    p.add_argument("outdir")
    p.add_argument("--grid-a", help="comma list of thresholds")
    p.add_argument("--grid-t", help="comma list of window lengths")
    p.add_argument("--grid-p", help="comma list of percentages")
    p.add_argument("--grid-tr", help="comma list of skips")
    p.add_argument("--tolerance", type=int, default=5)
    _add_common(p, figures=True, fmt=True)
    _add_detection(p)
    _add_script(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="operation-count complexity experiments")
    p.add_argument("outdir")
    p.add_argument("--sizes", type=_int_list, default=[100000, 200000, 400000, 800000])
    _add_common(p, figures=True, fmt=True)
    _add_detection(p)
    _add_script(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CodecError, MarkerOverlap, IoFailure, OSError, ValueError) as exc:
        _err(f"{args.command}: {exc}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
