"""Waveform containers and the pure signal math the rest of the toolkit builds on.

All audio is held as 64-bit float in nominal [-1, 1]. Mono sources, FOA
(B-format, AmbiX) 4-channel audio, linear convolution, RMS/gain arithmetic
and the epsilon-floored SDR live here; nothing in this module touches disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

TOOLKIT_SAMPLE_RATE = 32000

# Distortion/energy floor so SDR is defined for a perfect estimate; caps the
# metric near 100 dB for unit-energy references.
SDR_EPSILON = 1e-10

# Impulse responses longer than this go through the FFT overlap-add path.
DIRECT_CONV_MAX_IR = 128

FOA_CHANNELS = 4
FOA_CHANNEL_NAMES = ("W", "Y", "Z", "X")  # ACN order, SN3D normalization


def _as_float_vector(samples) -> np.ndarray:
    out = np.asarray(samples, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"expected a 1-D sample vector, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class MonoClip:
    """A single-channel waveform with its sample rate.

    Samples are stored as float64. Length must be >= 1 and all samples
    finite; the 32 kHz toolkit rate is enforced at file ingest, not here.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_float_vector(self.samples))
        if self.samples.size < 1:
            raise ValueError("MonoClip must contain at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("MonoClip contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class FoaClip:
    """A 4-channel B-format (AmbiX) waveform: ACN channel order (W, Y, Z, X),
    SN3D normalization. ``channels`` has shape (4, n_samples)."""

    channels: np.ndarray
    sample_rate: int

    def __post_init__(self):
        chans = np.asarray(self.channels, dtype=np.float64)
        if chans.ndim != 2 or chans.shape[0] != FOA_CHANNELS:
            raise ValueError(
                f"FoaClip needs exactly {FOA_CHANNELS} equal-length channels, got shape {chans.shape}"
            )
        if chans.shape[1] < 1:
            raise ValueError("FoaClip must contain at least one sample per channel")
        if not np.all(np.isfinite(chans)):
            raise ValueError("FoaClip contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.channels.shape[1])

    def channel(self, index: int) -> MonoClip:
        if not 0 <= index < FOA_CHANNELS:
            raise ValueError(f"channel index {index} outside [0, {FOA_CHANNELS})")
        return MonoClip(self.channels[index].copy(), self.sample_rate)


def convolve_full(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of two 1-D float vectors, length len(x)+len(h)-1.

    Short kernels use direct convolution; longer ones the FFT overlap-add
    engine. Both agree with direct convolution to well below 1e-9 on
    unit-scale inputs.
    """
    x = _as_float_vector(x)
    h = _as_float_vector(h)
    if x.size == 0 or h.size == 0:
        raise ValueError("convolution operands must be non-empty")
    if h.size <= DIRECT_CONV_MAX_IR:
        return np.convolve(x, h)
    return oaconvolve(x, h)


def convolve_mono(source: MonoClip, ir: MonoClip, trim: int | None = None) -> MonoClip:
    """Convolve a mono source with a single-channel impulse response."""
    if source.sample_rate != ir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: source {source.sample_rate} Hz vs ir {ir.sample_rate} Hz"
        )
    out = convolve_full(source.samples, ir.samples)
    if trim is not None:
        out = out[:trim]
    return MonoClip(out, source.sample_rate)


def convolve(source: MonoClip, ir: FoaClip, trim: int | None = None) -> FoaClip:
    """Convolve a mono source with a 4-channel impulse response.

    Channel m of the output is the full linear convolution of the source
    with ir channel m (length T + H - 1). Pass ``trim=T`` to truncate to
    the source length for in-clip rendering.
    """
    if source.sample_rate != ir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: source {source.sample_rate} Hz vs ir {ir.sample_rate} Hz"
        )
    full_len = len(source) + len(ir) - 1
    out_len = full_len if trim is None else min(trim, full_len)
    out = np.zeros((FOA_CHANNELS, out_len))
    for m in range(FOA_CHANNELS):
        out[m] = convolve_full(source.samples, ir.channels[m])[:out_len]
    return FoaClip(out, source.sample_rate)


def rms(clip: MonoClip, region: tuple[int, int] | None = None) -> float:
    """Root-mean-square amplitude over ``region`` (half-open sample interval),
    or the whole clip when region is None."""
    if region is None:
        segment = clip.samples
    else:
        start, stop = region
        if not (0 <= start < stop <= len(clip)):
            raise ValueError(
                f"region [{start}, {stop}) empty or outside clip of {len(clip)} samples"
            )
        segment = clip.samples[start:stop]
    return float(np.sqrt(np.mean(np.square(segment))))


def gain_for_snr(signal_rms: float, noise_rms: float, target_snr_db: float) -> float:
    """Linear gain g such that 20*log10(g * signal_rms / noise_rms) == target_snr_db."""
    if not signal_rms > 0:
        raise ValueError(f"signal_rms must be positive, got {signal_rms} (silent source?)")
    if not noise_rms > 0:
        raise ValueError(f"noise_rms must be positive, got {noise_rms} (silent noise bed?)")
    return 10.0 ** (target_snr_db / 20.0) * noise_rms / signal_rms


def sdr(estimate: MonoClip, reference: MonoClip, epsilon: float = SDR_EPSILON) -> float:
    """Signal-to-distortion ratio in dB: 10*log10((|x|^2 + eps) / (|x - xhat|^2 + eps)).

    The epsilon floor makes the ratio total and deterministic: a perfect
    estimate lands near 100 dB for a unit-energy reference, and an all-zero
    estimate of any reference scores exactly 0 dB.
    """
    if len(estimate) != len(reference):
        raise ValueError(
            f"length mismatch: estimate {len(estimate)} vs reference {len(reference)} samples"
        )
    if estimate.sample_rate != reference.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: estimate {estimate.sample_rate} Hz "
            f"vs reference {reference.sample_rate} Hz"
        )
    ref_energy = float(np.dot(reference.samples, reference.samples))
    err = reference.samples - estimate.samples
    err_energy = float(np.dot(err, err))
    return 10.0 * math.log10((ref_energy + epsilon) / (err_energy + epsilon))
