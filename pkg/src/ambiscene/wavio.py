"""RIFF/WAVE reader and writer.

Reads PCM 16/24-bit and IEEE float 32-bit files (plain or WAVE_FORMAT_EXTENSIBLE)
into float64 arrays scaled to [-1, 1]; writes canonical headers at 16-bit,
24-bit or float32. Parse failures raise WavFormatError naming the offending
chunk and byte offset rather than crashing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_INT16_SCALE = 32768.0
_INT24_SCALE = 8388608.0

SUPPORTED_BIT_DEPTHS = (16, 24, 32)  # 32 means IEEE float32


class WavFormatError(ValueError):
    """Malformed or unsupported RIFF/WAVE data; message carries a byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class WavInfo:
    """Format summary of a parsed WAV file."""

    sample_rate: int
    channels: int
    bit_depth: int          # 16, 24 or 32 (32 = IEEE float)
    sample_format: str      # "pcm16", "pcm24" or "float32"
    n_frames: int
    data_offset: int        # byte offset of the data payload


def _read_exact(fh, count: int, what: str) -> bytes:
    offset = fh.tell()
    data = fh.read(count)
    if len(data) != count:
        raise WavFormatError(
            f"truncated file: expected {count} bytes for {what}, got {len(data)}", offset
        )
    return data


def _parse_fmt(payload: bytes, offset: int) -> tuple[int, int, int, int]:
    """Return (format_tag, channels, sample_rate, bits_per_sample)."""
    if len(payload) < 16:
        raise WavFormatError(f"'fmt ' chunk too short ({len(payload)} bytes)", offset)
    format_tag, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", payload, 0)
    if format_tag == WAVE_FORMAT_EXTENSIBLE:
        if len(payload) < 40:
            raise WavFormatError("extensible 'fmt ' chunk shorter than 40 bytes", offset)
        # Sub-format GUID: first 4 bytes hold the actual codec id.
        format_tag = struct.unpack_from("<I", payload, 24)[0]
    return format_tag, channels, sample_rate, bits


def _scan_chunks(fh, riff_end: int):
    """Yield (chunk_id, payload_size, payload_offset); seek past each payload."""
    while fh.tell() + 8 <= riff_end:
        header_offset = fh.tell()
        header = fh.read(8)
        if len(header) < 8:
            raise WavFormatError("truncated chunk header", header_offset)
        chunk_id, size = struct.unpack("<4sI", header)
        payload_offset = fh.tell()
        yield chunk_id, size, payload_offset
        # Chunks are word-aligned: odd payloads carry one pad byte.
        fh.seek(payload_offset + size + (size & 1))


def _parse_header(fh) -> tuple[WavInfo, int]:
    """Parse up to (and including) the data chunk header; return (info, data_size)."""
    riff = _read_exact(fh, 12, "RIFF header")
    magic, riff_size, wave = struct.unpack("<4sI4s", riff)
    if magic != b"RIFF":
        raise WavFormatError(f"not a RIFF file (leading bytes {magic!r})", 0)
    if wave != b"WAVE":
        raise WavFormatError(f"RIFF form type is {wave!r}, expected b'WAVE'", 8)
    riff_end = 8 + riff_size

    fmt: tuple[int, int, int, int] | None = None
    for chunk_id, size, payload_offset in _scan_chunks(fh, riff_end):
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(_read_exact(fh, min(size, 64), "'fmt ' chunk"), payload_offset)
        elif chunk_id == b"data":
            if fmt is None:
                raise WavFormatError("'data' chunk appears before 'fmt ' chunk", payload_offset)
            format_tag, channels, sample_rate, bits = fmt
            if channels < 1:
                raise WavFormatError("channel count is zero", payload_offset)
            if sample_rate < 1:
                raise WavFormatError("sample rate is zero", payload_offset)
            if format_tag == WAVE_FORMAT_PCM and bits in (16, 24):
                sample_format = f"pcm{bits}"
            elif format_tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
                sample_format = "float32"
            else:
                raise WavFormatError(
                    f"unsupported codec: format tag 0x{format_tag:04X} at {bits} bits "
                    "(supported: PCM 16/24-bit, IEEE float 32-bit)",
                    payload_offset,
                )
            frame_size = channels * (bits // 8)
            if size % frame_size != 0:
                raise WavFormatError(
                    f"'data' payload of {size} bytes is not a whole number of "
                    f"{frame_size}-byte frames",
                    payload_offset,
                )
            info = WavInfo(
                sample_rate=sample_rate,
                channels=channels,
                bit_depth=bits,
                sample_format=sample_format,
                n_frames=size // frame_size,
                data_offset=payload_offset,
            )
            return info, size
    missing = "'fmt '" if fmt is None else "'data'"
    raise WavFormatError(f"missing {missing} chunk", fh.tell())


def probe_wav(path: str | Path) -> WavInfo:
    """Parse the header only; cheap existence/format check for validators."""
    with open(path, "rb") as fh:
        info, _ = _parse_header(fh)
    return info


def _decode(raw: bytes, info: WavInfo) -> np.ndarray:
    if info.sample_format == "pcm16":
        flat = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _INT16_SCALE
    elif info.sample_format == "pcm24":
        triplets = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        # Sign-extend 3-byte little-endian integers via a 4th byte.
        padded = np.zeros((triplets.shape[0], 4), dtype=np.uint8)
        padded[:, :3] = triplets
        padded[:, 3] = np.where(triplets[:, 2] & 0x80, 0xFF, 0x00)
        flat = padded.view("<i4").ravel().astype(np.float64) / _INT24_SCALE
    else:  # float32
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return flat.reshape(info.n_frames, info.channels).T.copy()


def read_wav(path: str | Path) -> tuple[np.ndarray, WavInfo]:
    """Read a WAV file into a float64 array of shape (channels, n_frames).

    Integer PCM is scaled to [-1, 1] (16-bit by 1/32768, 24-bit by 1/8388608);
    float payloads pass through unchanged.
    """
    with open(path, "rb") as fh:
        info, data_size = _parse_header(fh)
        raw = fh.read(data_size)
        if len(raw) != data_size:
            raise WavFormatError(
                f"truncated file: 'data' chunk declares {data_size} bytes, "
                f"only {len(raw)} present",
                info.data_offset,
            )
    return _decode(raw, info), info


def _encode_pcm(data: np.ndarray, scale: float, lo: int, hi: int) -> np.ndarray:
    # Round half away from zero, then clamp at full scale.
    scaled = data * scale
    rounded = np.trunc(scaled + np.copysign(0.5, scaled))
    return np.clip(rounded, lo, hi)


def write_wav(path: str | Path, data: np.ndarray, sample_rate: int, bit_depth: int = 16) -> None:
    """Write (channels, n_frames) or (n_frames,) float data as a canonical WAV.

    bit_depth 16/24 produce PCM with round-half-away-from-zero quantization
    clamped at full scale; 32 produces IEEE float32 (with a fact chunk).
    """
    if bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise ValueError(f"bit_depth must be one of {SUPPORTED_BIT_DEPTHS}, got {bit_depth}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D sample data, got shape {data.shape}")
    channels, n_frames = data.shape
    interleaved = data.T  # (n_frames, channels)

    if bit_depth == 16:
        payload = _encode_pcm(interleaved, _INT16_SCALE, -32768, 32767).astype("<i2").tobytes()
        format_tag, bytes_per_sample = WAVE_FORMAT_PCM, 2
    elif bit_depth == 24:
        ints = np.ascontiguousarray(_encode_pcm(interleaved, _INT24_SCALE, -8388608, 8388607).astype("<i4"))
        quads = ints.view(np.uint8).reshape(-1, 4)
        payload = np.ascontiguousarray(quads[:, :3]).tobytes()
        format_tag, bytes_per_sample = WAVE_FORMAT_PCM, 3
    else:
        payload = interleaved.astype("<f4").tobytes()
        format_tag, bytes_per_sample = WAVE_FORMAT_IEEE_FLOAT, 4

    block_align = channels * bytes_per_sample
    fmt_chunk = struct.pack(
        "<4sIHHIIHH",
        b"fmt ",
        16,
        format_tag,
        channels,
        int(sample_rate),
        int(sample_rate) * block_align,
        block_align,
        bytes_per_sample * 8,
    )
    fact_chunk = b""
    if format_tag != WAVE_FORMAT_PCM:
        fact_chunk = struct.pack("<4sII", b"fact", 4, n_frames)
    data_header = struct.pack("<4sI", b"data", len(payload))
    pad = b"\x00" if len(payload) & 1 else b""
    body = fmt_chunk + fact_chunk + data_header + payload + pad
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI4s", b"RIFF", 4 + len(body), b"WAVE"))
        fh.write(body)
