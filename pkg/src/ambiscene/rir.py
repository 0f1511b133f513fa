"""Room impulse response bank and direct-path extraction.

The bank indexes RIR manifest records by (room, microphone position) and
loads audio lazily, so scene sampling never touches disk. Direct-path
extraction windows a 4-channel RIR down to the earliest line-of-sight
energy on a chosen reference channel; rendering a source through the
result yields the relaxed separation target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import wavio
from .manifest import Manifest, RirRecord
from .signal import FoaClip, MonoClip

DEFAULT_PRE_MS = 0.5
DEFAULT_POST_MS = 2.0
DEFAULT_FADE_MS = 0.25
DEFAULT_REF_CHANNEL = 0  # W: omnidirectional, so the target level is direction-independent


@dataclass(frozen=True)
class Rir:
    """A loaded 4-channel impulse response with its spatial metadata."""

    ir: FoaClip
    rir_id: str
    room_id: str
    position_id: str
    azimuth_deg: float
    elevation_deg: float
    distance_m: float

    @property
    def sample_rate(self) -> int:
        return self.ir.sample_rate


@dataclass(frozen=True)
class DirectPathIr:
    """Single-channel direct-path impulse response extracted from a RIR.

    The waveform keeps the full RIR length (so propagation delay is
    preserved) but is zero outside the retained window around the peak.
    ``window`` records the (pre_ms, post_ms) extent used.
    """

    ir: MonoClip
    source_rir: str
    window: tuple[float, float]


class RirBankError(ValueError):
    pass


class RirBank:
    """Immutable lookup over RIR records, keyed by id and by (room, position)."""

    def __init__(self, records: list[RirRecord], root=None):
        self._records = list(records)
        self._root = root
        self._by_id: dict[str, RirRecord] = {}
        self._by_position: dict[tuple[str, str], list[RirRecord]] = {}
        for record in self._records:
            if record.rir_id in self._by_id:
                raise RirBankError(f"duplicate rir id '{record.rir_id}'")
            self._by_id[record.rir_id] = record
            self._by_position.setdefault((record.room_id, record.position_id), []).append(record)
        # Deterministic draw order regardless of manifest ordering.
        for entries in self._by_position.values():
            entries.sort(key=lambda r: r.rir_id)

    @classmethod
    def from_manifest(cls, manifest: Manifest) -> "RirBank":
        return cls(manifest.rirs, root=manifest.root)

    def __len__(self) -> int:
        return len(self._records)

    def position_keys(self) -> list[tuple[str, str]]:
        return sorted(self._by_position)

    def records_at(self, room_id: str, position_id: str) -> list[RirRecord]:
        return list(self._by_position.get((room_id, position_id), []))

    def record(self, rir_id: str) -> RirRecord:
        try:
            return self._by_id[rir_id]
        except KeyError:
            raise RirBankError(f"unknown rir id '{rir_id}'") from None

    def __contains__(self, rir_id: str) -> bool:
        return rir_id in self._by_id

    def load(self, rir_id: str) -> Rir:
        """Read the RIR audio from disk and wrap it with its metadata."""
        record = self.record(rir_id)
        path = record.path if self._root is None else self._root / record.path
        try:
            data, info = wavio.read_wav(path)
        except (OSError, wavio.WavFormatError) as exc:
            raise RirBankError(f"cannot load rir '{rir_id}' from {path}: {exc}") from exc
        if info.channels != 4:
            raise RirBankError(f"rir '{rir_id}' has {info.channels} channels, expected 4")
        return Rir(
            ir=FoaClip(data, info.sample_rate),
            rir_id=record.rir_id,
            room_id=record.room_id,
            position_id=record.position_id,
            azimuth_deg=record.azimuth_deg,
            elevation_deg=record.elevation_deg,
            distance_m=record.distance_m,
        )


def select_rir(bank: RirBank, room_id: str, position_id: str,
               rng: np.random.Generator) -> RirRecord:
    """Uniform draw among the RIRs measured at one (room, position) key."""
    candidates = bank._by_position.get((room_id, position_id))
    if not candidates:
        raise RirBankError(f"no RIR available for room '{room_id}' position '{position_id}'")
    return candidates[int(rng.integers(len(candidates)))]


def _ms_to_samples(ms: float, sample_rate: int) -> int:
    return int(round(ms * sample_rate / 1000.0))


def extract_direct_path(
    rir: Rir,
    ref_channel: int = DEFAULT_REF_CHANNEL,
    pre_ms: float = DEFAULT_PRE_MS,
    post_ms: float = DEFAULT_POST_MS,
    fade_ms: float = DEFAULT_FADE_MS,
) -> DirectPathIr:
    """Window the reference channel of a RIR down to its direct path.

    The absolute-amplitude peak of the reference channel anchors a core
    window [peak - pre_ms, peak + post_ms) that passes through untouched.
    A raised-cosine skirt of fade_ms on each side softens the cut; a skirt
    is only faded when nonzero content actually lies beyond it, which makes
    the extraction a projection: re-extracting an already windowed response
    returns it unchanged.
    """
    if not 0 <= ref_channel < 4:
        raise ValueError(f"ref_channel {ref_channel} outside [0, 4)")
    if pre_ms < 0 or post_ms <= 0 or fade_ms < 0:
        raise ValueError("window lengths must be positive (pre_ms may be zero)")
    samples = rir.ir.channels[ref_channel]
    if not np.any(samples):
        raise ValueError(f"rir '{rir.rir_id}' reference channel {ref_channel} is all zero")

    sample_rate = rir.sample_rate
    length = samples.size
    peak = int(np.argmax(np.abs(samples)))
    pre_n = _ms_to_samples(pre_ms, sample_rate)
    post_n = max(1, _ms_to_samples(post_ms, sample_rate))
    fade_n = _ms_to_samples(fade_ms, sample_rate)

    core_lo = max(peak - pre_n, 0)
    core_hi = min(peak + post_n, length)
    skirt_lo = max(core_lo - fade_n, 0)
    skirt_hi = min(core_hi + fade_n, length)

    out = np.zeros_like(samples)
    out[core_lo:core_hi] = samples[core_lo:core_hi]

    # Half-cosine ramp from ~0 at the outer edge to ~1 beside the core.
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(1, fade_n + 1) / (fade_n + 1))

    if np.any(samples[:skirt_lo]):
        width = core_lo - skirt_lo
        out[skirt_lo:core_lo] = samples[skirt_lo:core_lo] * ramp[fade_n - width:]
    else:
        out[skirt_lo:core_lo] = samples[skirt_lo:core_lo]

    if np.any(samples[skirt_hi:]):
        width = skirt_hi - core_hi
        out[core_hi:skirt_hi] = samples[core_hi:skirt_hi] * ramp[fade_n - width:][::-1]
    else:
        out[core_hi:skirt_hi] = samples[core_hi:skirt_hi]

    return DirectPathIr(
        ir=MonoClip(out, sample_rate),
        source_rir=rir.rir_id,
        window=(pre_ms, post_ms),
    )
