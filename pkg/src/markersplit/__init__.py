"""Split switch-marked speech recordings into phoneme segments."""

from .adm import DetectionParams, DetectionResult, count_candidates, detect_markers, is_marker_window
from .codec import (
    AdpcmBlock,
    AudioStream,
    Codec,
    WavFormatDescriptor,
    decode_adpcm,
    encode_adpcm,
    parse_wav,
    read_wav,
    snr_db,
    write_stream,
    write_wav,
)
from .marker import MarkerTemplate, RecorderEvent, RecorderState, default_template, step_state, synthesize_marker
from .segmenter import Segment, SilenceParams, export_segments, segment_stream
from .synthgen import GroundTruth, RecordingScript, evaluate_detection, generate_recording

__version__ = "0.1.0"

__all__ = [
    "AdpcmBlock", "AudioStream", "Codec", "DetectionParams", "DetectionResult", "GroundTruth",
    "MarkerTemplate", "RecorderEvent", "RecorderState", "RecordingScript", "Segment",
    "SilenceParams", "WavFormatDescriptor", "count_candidates", "decode_adpcm",
    "default_template", "detect_markers", "encode_adpcm", "evaluate_detection",
    "export_segments", "generate_recording", "is_marker_window", "parse_wav", "read_wav",
    "segment_stream", "snr_db", "step_state", "synthesize_marker", "write_stream", "write_wav",
]
