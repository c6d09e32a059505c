"""WAV container handling and the IMA-ADPCM 4-bit codec.

Everything here is a pure function of its inputs. Samples travel as
``numpy.int16`` arrays wrapped in :class:`AudioStream`.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 16000
FULL_SCALE = 32767

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IMA_ADPCM = 0x0011

STEP_TABLE = (
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17,
    19, 21, 23, 25, 28, 31, 34, 37, 41, 45,
    50, 55, 60, 66, 73, 80, 88, 97, 107, 118,
    130, 143, 157, 173, 190, 209, 230, 253, 279, 307,
    337, 371, 408, 449, 494, 544, 598, 658, 724, 796,
    876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358,
    5894, 6484, 7132, 7845, 8630, 9493, 10442, 11487, 12635, 13899,
    15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767,
)
INDEX_TABLE = (-1, -1, -1, -1, 2, 4, 6, 8)
MAX_STEP_INDEX = len(STEP_TABLE) - 1

# Magnitude of the reconstructed difference for every (step index, 3-bit code).
_DIFF_TABLE = tuple(
    tuple(
        (step >> 3)
        + (step if code & 4 else 0)
        + (step >> 1 if code & 2 else 0)
        + (step >> 2 if code & 1 else 0)
        for code in range(8)
    )
    for step in STEP_TABLE
)


class CodecError(ValueError):
    """Base class for container and codec failures."""


class MalformedRiff(CodecError):
    pass


class UnsupportedFormat(CodecError):
    pass


class TruncatedData(CodecError):
    pass


class InconsistentDescriptor(CodecError):
    pass


class InvalidBlockSize(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


class SilentReference(CodecError):
    pass


class Codec(enum.Enum):
    PCM16 = WAVE_FORMAT_PCM
    IMA_ADPCM = WAVE_FORMAT_IMA_ADPCM


@dataclass(frozen=True, eq=False)
class AudioStream:
    """Mono signed 16-bit samples at a fixed rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        raw = np.asarray(self.samples)
        if raw.dtype != np.int16:
            if raw.size and (raw.min() < -32768 or raw.max() > 32767):
                raise ValueError("samples outside the signed 16-bit range")
            raw = raw.astype(np.int16)
        if raw.ndim != 1:
            raise ValueError("AudioStream holds a single channel")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", raw)

    @property
    def channel_count(self) -> int:
        return 1

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioStream):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    def slice(self, start: int, end: int) -> "AudioStream":
        return AudioStream(self.samples[start:end].copy(), self.sample_rate)

    def peak(self) -> int:
        if not len(self.samples):
            return 0
        return int(np.abs(self.samples.astype(np.int32)).max())


@dataclass(frozen=True)
class WavFormatDescriptor:
    codec_tag: Codec
    sample_rate: int = DEFAULT_SAMPLE_RATE
    bits_per_sample: int = 16
    block_align: int = 2
    samples_per_block: int | None = None

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise InconsistentDescriptor("sample_rate must be positive")
        if self.codec_tag is Codec.PCM16:
            if self.bits_per_sample != 16 or self.block_align != 2:
                raise InconsistentDescriptor("PCM16 requires 16 bits and block_align 2")
            if self.samples_per_block is not None:
                raise InconsistentDescriptor("samples_per_block applies to ADPCM only")
        else:
            if self.bits_per_sample != 4:
                raise InconsistentDescriptor("IMA-ADPCM requires 4 bits per sample")
            if self.block_align < 5:
                raise InconsistentDescriptor("ADPCM block_align must be at least 5")
            if self.samples_per_block != (self.block_align - 4) * 2 + 1:
                raise InconsistentDescriptor(
                    f"samples_per_block {self.samples_per_block} does not match "
                    f"block_align {self.block_align}"
                )

    @classmethod
    def pcm16(cls, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "WavFormatDescriptor":
        return cls(Codec.PCM16, sample_rate, 16, 2, None)

    @classmethod
    def ima_adpcm(
        cls, sample_rate: int = DEFAULT_SAMPLE_RATE, block_align: int = 256
    ) -> "WavFormatDescriptor":
        return cls(Codec.IMA_ADPCM, sample_rate, 4, block_align, (block_align - 4) * 2 + 1)

    @property
    def byte_rate(self) -> int:
        if self.codec_tag is Codec.PCM16:
            return self.sample_rate * 2
        return self.sample_rate * self.block_align // self.samples_per_block


@dataclass(frozen=True)
class AdpcmBlock:
    predictor: int
    step_index: int
    nibbles: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not -32768 <= self.predictor <= 32767:
            raise ValueError(f"predictor {self.predictor} outside signed 16-bit range")
        if not 0 <= self.step_index <= MAX_STEP_INDEX:
            raise ValueError(f"step_index {self.step_index} outside [0, {MAX_STEP_INDEX}]")
        nibbles = tuple(int(n) for n in self.nibbles)
        if any(n < 0 or n > 15 for n in nibbles):
            raise ValueError("nibbles must lie in [0, 15]")
        object.__setattr__(self, "nibbles", nibbles)

    def __len__(self) -> int:
        return 1 + len(self.nibbles)


# ---------------------------------------------------------------------------
# RIFF/WAVE container
# ---------------------------------------------------------------------------

def parse_wav(data: bytes) -> tuple[WavFormatDescriptor, bytes]:
    """Return the format descriptor and the raw ``data`` chunk payload.

    Unknown chunks are skipped. Only mono PCM16 and IMA-ADPCM are accepted.
    """
    data = bytes(data)
    if len(data) < 12:
        raise MalformedRiff(f"RIFF header: need 12 bytes, got {len(data)}")
    magic, riff_size, wave = struct.unpack_from("<4sI4s", data, 0)
    if magic != b"RIFF":
        raise MalformedRiff(f"RIFF header: bad magic {magic!r}")
    if wave != b"WAVE":
        raise MalformedRiff(f"RIFF header: form type {wave!r} is not WAVE")
    if riff_size < 4:
        raise MalformedRiff(f"RIFF header: size field {riff_size} too small")
    end = min(len(data), 8 + riff_size)

    fmt_body = None
    payload = None
    pos = 12
    while pos + 8 <= end:
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body_start = pos + 8
        if body_start + size > len(data):
            name = chunk_id.decode("latin-1")
            raise TruncatedData(
                f"chunk {name!r}: declares {size} bytes, {len(data) - body_start} available"
            )
        body = data[body_start:body_start + size]
        if chunk_id == b"fmt ":
            fmt_body = body
        elif chunk_id == b"data":
            payload = body
        pos = body_start + size + (size & 1)

    if fmt_body is None:
        raise MalformedRiff("chunk 'fmt ': missing")
    if payload is None:
        raise MalformedRiff("chunk 'data': missing")
    descriptor = _parse_fmt(fmt_body)
    if descriptor.codec_tag is Codec.PCM16 and len(payload) % 2:
        raise TruncatedData(f"chunk 'data': odd PCM16 payload length {len(payload)}")
    if descriptor.codec_tag is Codec.IMA_ADPCM and 0 < len(payload) % descriptor.block_align < 4:
        raise TruncatedData("chunk 'data': final ADPCM block shorter than its header")
    return descriptor, payload


def _parse_fmt(body: bytes) -> WavFormatDescriptor:
    if len(body) < 16:
        raise MalformedRiff(f"chunk 'fmt ': {len(body)} bytes, need at least 16")
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body, 0)
    if channels != 1:
        raise UnsupportedFormat(f"chunk 'fmt ': {channels} channels, only mono is supported")
    if rate == 0:
        raise MalformedRiff("chunk 'fmt ': sample rate is zero")
    if tag == WAVE_FORMAT_PCM:
        if bits != 16:
            raise UnsupportedFormat(f"chunk 'fmt ': PCM with {bits} bits, only 16 supported")
        if block_align != 2:
            raise MalformedRiff(f"chunk 'fmt ': PCM16 mono block_align {block_align} != 2")
        return WavFormatDescriptor.pcm16(rate)
    if tag == WAVE_FORMAT_IMA_ADPCM:
        if bits != 4:
            raise UnsupportedFormat(f"chunk 'fmt ': IMA-ADPCM with {bits} bits")
        if len(body) < 20:
            raise MalformedRiff("chunk 'fmt ': IMA-ADPCM extension missing samplesPerBlock")
        (samples_per_block,) = struct.unpack_from("<H", body, 18)
        try:
            return WavFormatDescriptor(Codec.IMA_ADPCM, rate, 4, block_align, samples_per_block)
        except InconsistentDescriptor as exc:
            raise MalformedRiff(f"chunk 'fmt ': {exc}") from None
    raise UnsupportedFormat(f"chunk 'fmt ': codec tag 0x{tag:04x} not supported")


def write_wav(descriptor: WavFormatDescriptor, payload: bytes) -> bytes:
    """Serialize a canonical RIFF/WAVE file with only fmt and data chunks."""
    payload = bytes(payload)
    if len(payload) % descriptor.block_align:
        raise InconsistentDescriptor(
            f"payload of {len(payload)} bytes is not a multiple of "
            f"block_align {descriptor.block_align}"
        )
    if descriptor.codec_tag is Codec.PCM16:
        fmt = struct.pack(
            "<HHIIHH", WAVE_FORMAT_PCM, 1, descriptor.sample_rate,
            descriptor.byte_rate, 2, 16,
        )
    else:
        fmt = struct.pack(
            "<HHIIHHHH", WAVE_FORMAT_IMA_ADPCM, 1, descriptor.sample_rate,
            descriptor.byte_rate, descriptor.block_align, 4, 2,
            descriptor.samples_per_block,
        )
    pad = b"\x00" if len(payload) & 1 else b""
    chunks = (
        b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(payload)) + payload + pad
    )
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


# ---------------------------------------------------------------------------
# IMA-ADPCM
# ---------------------------------------------------------------------------

def decode_adpcm(
    blocks: Iterable[AdpcmBlock], sample_rate: int = DEFAULT_SAMPLE_RATE
) -> AudioStream:
    out: list[int] = []
    for block in blocks:
        sample = block.predictor
        index = block.step_index
        out.append(sample)
        for code in block.nibbles:
            diff = _DIFF_TABLE[index][code & 7]
            sample = sample - diff if code & 8 else sample + diff
            if sample > 32767:
                sample = 32767
            elif sample < -32768:
                sample = -32768
            index += INDEX_TABLE[code & 7]
            if index < 0:
                index = 0
            elif index > MAX_STEP_INDEX:
                index = MAX_STEP_INDEX
            out.append(sample)
    return AudioStream(np.asarray(out, dtype=np.int16), sample_rate)


def encode_adpcm(stream: AudioStream, samples_per_block: int = 505) -> list[AdpcmBlock]:
    """Greedy nearest-code IMA-ADPCM encoder.

    Each block header stores the true first sample; the step index carries
    across blocks. A short final block is padded by holding the last sample.
    """
    if samples_per_block < 2:
        raise InvalidBlockSize(f"samples_per_block must be >= 2, got {samples_per_block}")
    samples = stream.samples.tolist()
    if not samples:
        return []
    remainder = len(samples) % samples_per_block
    if remainder:
        samples.extend([samples[-1]] * (samples_per_block - remainder))

    blocks = []
    index = 0
    for start in range(0, len(samples), samples_per_block):
        chunk = samples[start:start + samples_per_block]
        predicted = chunk[0]
        header_index = index
        codes = []
        for target in chunk[1:]:
            code, predicted = _nearest_code(target, predicted, index)
            codes.append(code)
            index = min(MAX_STEP_INDEX, max(0, index + INDEX_TABLE[code & 7]))
        blocks.append(AdpcmBlock(chunk[0], header_index, tuple(codes)))
    return blocks


def _nearest_code(target: int, predicted: int, index: int) -> tuple[int, int]:
    diffs = _DIFF_TABLE[index]
    delta = target - predicted
    sign = 0 if delta >= 0 else 8
    magnitude = abs(delta)
    step = STEP_TABLE[index]
    # reconstructed magnitudes are spaced step/4 apart starting at step/8
    guess = min(7, max(0, ((magnitude - (step >> 3)) * 4) // step)) if step else 0
    best_code = sign
    best_value = predicted
    best_err = None
    for mag in (guess - 1, guess, guess + 1):
        if not 0 <= mag <= 7:
            continue
        value = predicted - diffs[mag] if sign else predicted + diffs[mag]
        value = min(32767, max(-32768, value))
        err = abs(target - value)
        if best_err is None or err < best_err:
            best_code, best_value, best_err = sign | mag, value, err
    return best_code, best_value


def pack_adpcm_blocks(blocks: Sequence[AdpcmBlock], block_align: int) -> bytes:
    """Serialize blocks; nibbles are packed low-nibble-first, zero padded."""
    out = bytearray()
    body_len = block_align - 4
    for block in blocks:
        nibbles = list(block.nibbles)
        if len(nibbles) > body_len * 2:
            raise InvalidBlockSize(f"{len(nibbles)} nibbles do not fit block_align {block_align}")
        nibbles.extend([0] * (body_len * 2 - len(nibbles)))
        out += struct.pack("<hBB", block.predictor, block.step_index, 0)
        out += bytes(nibbles[i] | (nibbles[i + 1] << 4) for i in range(0, len(nibbles), 2))
    return bytes(out)


def unpack_adpcm_blocks(payload: bytes, block_align: int) -> list[AdpcmBlock]:
    blocks = []
    for start in range(0, len(payload), block_align):
        raw = payload[start:start + block_align]
        if len(raw) < 4:
            raise TruncatedData(f"ADPCM block at byte {start}: {len(raw)} bytes, header needs 4")
        predictor, step_index, _reserved = struct.unpack_from("<hBB", raw, 0)
        if step_index > MAX_STEP_INDEX:
            raise MalformedRiff(f"ADPCM block at byte {start}: step index {step_index}")
        nibbles = []
        for byte in raw[4:]:
            nibbles.append(byte & 0x0F)
            nibbles.append(byte >> 4)
        blocks.append(AdpcmBlock(predictor, step_index, tuple(nibbles)))
    return blocks


def snr_db(reference: AudioStream, test: AudioStream) -> float:
    """Signal-to-noise ratio of ``test`` against ``reference`` in decibels.

    Returns ``math.inf`` when the streams are identical.
    """
    if len(reference) != len(test):
        raise LengthMismatch(f"reference has {len(reference)} samples, test {len(test)}")
    ref = reference.samples.astype(np.float64)
    signal = float(np.dot(ref, ref))
    if signal == 0.0:
        raise SilentReference("reference stream has no energy")
    err = ref - test.samples.astype(np.float64)
    noise = float(np.dot(err, err))
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


# ---------------------------------------------------------------------------
# file-level helpers
# ---------------------------------------------------------------------------

def decode_payload(descriptor: WavFormatDescriptor, payload: bytes) -> AudioStream:
    if descriptor.codec_tag is Codec.PCM16:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.int16)
        return AudioStream(samples, descriptor.sample_rate)
    blocks = unpack_adpcm_blocks(payload, descriptor.block_align)
    return decode_adpcm(blocks, descriptor.sample_rate)


def pcm16_bytes(stream: AudioStream) -> bytes:
    return stream.samples.astype("<i2").tobytes()


def stream_to_wav(stream: AudioStream, codec: Codec = Codec.PCM16, block_align: int = 256) -> bytes:
    if codec is Codec.PCM16:
        return write_wav(WavFormatDescriptor.pcm16(stream.sample_rate), pcm16_bytes(stream))
    descriptor = WavFormatDescriptor.ima_adpcm(stream.sample_rate, block_align)
    blocks = encode_adpcm(stream, descriptor.samples_per_block)
    return write_wav(descriptor, pack_adpcm_blocks(blocks, block_align))


def read_wav(path: str | Path) -> tuple[AudioStream, WavFormatDescriptor]:
    descriptor, payload = parse_wav(Path(path).read_bytes())
    return decode_payload(descriptor, payload), descriptor


def write_stream(
    path: str | Path, stream: AudioStream, codec: Codec = Codec.PCM16, block_align: int = 256
) -> Path:
    path = Path(path)
    path.write_bytes(stream_to_wav(stream, codec, block_align))
    return path
