"""Seeded sampling of scene specifications.

A scene spec is the complete plan for one 10-second mixture: which events,
where in time, through which impulse responses, at what SNR, over which
noise bed. Sampling is a pure function of (pool, bank, seed) so corpora can
be regenerated bit-identically and rendered in parallel; per-scene seeds
are derived from a corpus seed with numpy's SeedSequence so scene i never
depends on how many scenes came before it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .manifest import Manifest, SourceRecord
from .rir import RirBank, RirBankError, select_rir
from .signal import TOOLKIT_SAMPLE_RATE

SPEC_VERSION = 1


class SceneSamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """Scene recipe knobs. Defaults reproduce the standard mixture recipe:
    10 s clips, 1-3 targets with distinct classes, 1-2 interferers, target
    SNR uniform in [5, 20] dB and interferer SNR in [0, 15] dB against the
    noise bed."""

    clip_length: float = 10.0
    sample_rate: int = TOOLKIT_SAMPLE_RATE
    target_count_range: tuple[int, int] = (1, 3)
    interferer_count_range: tuple[int, int] = (1, 2)
    target_snr_range: tuple[float, float] = (5.0, 20.0)
    interferer_snr_range: tuple[float, float] = (0.0, 15.0)
    max_simultaneous: int = 3
    max_onset_attempts: int = 100


@dataclass(frozen=True)
class EventPlacement:
    """One event scheduled inside a clip. ``gain`` stays None until the
    renderer solves it from the SNR against the actual noise bed."""

    class_label: str
    source_file: str
    onset: float
    duration: float
    rir_id: str
    snr_db: float
    gain: float | None = None

    def to_dict(self) -> dict:
        return {
            "class": self.class_label,
            "file": self.source_file,
            "onset": self.onset,
            "duration": self.duration,
            "rir_id": self.rir_id,
            "snr_db": self.snr_db,
            "gain": self.gain,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EventPlacement":
        return cls(
            class_label=data["class"],
            source_file=data["file"],
            onset=float(data["onset"]),
            duration=float(data["duration"]),
            rir_id=data["rir_id"],
            snr_db=float(data["snr_db"]),
            gain=None if data.get("gain") is None else float(data["gain"]),
        )


@dataclass(frozen=True)
class SceneSpec:
    """The fully-sampled plan of one mixture clip."""

    clip_length: float
    seed: int
    room_id: str
    position_id: str
    targets: tuple[EventPlacement, ...]
    interferers: tuple[EventPlacement, ...]
    noise_file: str
    noise_offset: float
    noise_gain: float = 1.0

    def to_dict(self) -> dict:
        return {
            "version": SPEC_VERSION,
            "clip_length": self.clip_length,
            "seed": self.seed,
            "room_id": self.room_id,
            "position_id": self.position_id,
            "targets": [p.to_dict() for p in self.targets],
            "interferers": [p.to_dict() for p in self.interferers],
            "noise_file": self.noise_file,
            "noise_offset": self.noise_offset,
            "noise_gain": self.noise_gain,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        return cls(
            clip_length=float(data["clip_length"]),
            seed=int(data["seed"]),
            room_id=data["room_id"],
            position_id=data["position_id"],
            targets=tuple(EventPlacement.from_dict(p) for p in data["targets"]),
            interferers=tuple(EventPlacement.from_dict(p) for p in data["interferers"]),
            noise_file=data["noise_file"],
            noise_offset=float(data["noise_offset"]),
            noise_gain=float(data.get("noise_gain", 1.0)),
        )


class SourcePool:
    """Audio assets available to the sampler, split by role.

    Lookup orders are sorted so draws depend only on pool contents, never
    on manifest record order.
    """

    def __init__(self, records: list[SourceRecord], root=None):
        self.root = root
        self._by_path: dict[str, SourceRecord] = {}
        targets: dict[str, list[SourceRecord]] = {}
        interference: list[SourceRecord] = []
        noise: list[SourceRecord] = []
        for record in records:
            if record.path in self._by_path:
                raise ValueError(f"duplicate source path '{record.path}'")
            self._by_path[record.path] = record
            if record.role == "target":
                targets.setdefault(record.class_label, []).append(record)
            elif record.role == "interference":
                interference.append(record)
            elif record.role == "noise":
                noise.append(record)
            else:
                raise ValueError(f"unknown role '{record.role}' for '{record.path}'")
        self._targets = {
            label: sorted(entries, key=lambda r: r.path) for label, entries in targets.items()
        }
        self.interference = sorted(interference, key=lambda r: r.path)
        self.noise = sorted(noise, key=lambda r: r.path)

    @classmethod
    def from_manifest(cls, manifest: Manifest, split: str | None = None) -> "SourcePool":
        records = [
            r for r in manifest.sources
            if split is None or r.split is None or r.split == split
        ]
        return cls(records, root=manifest.root)

    def target_classes(self) -> list[str]:
        return sorted(self._targets)

    def target_files(self, class_label: str) -> list[SourceRecord]:
        return list(self._targets.get(class_label, []))

    def record_for(self, path: str) -> SourceRecord | None:
        return self._by_path.get(path)

    def resolve(self, path: str):
        return path if self.root is None else self.root / path


def scene_seed(corpus_seed: int, scene_index: int) -> int:
    """Derive the 64-bit seed of one scene from the corpus seed.

    Uses numpy's SeedSequence keyed by (corpus_seed, scene_index), so scene
    seeds are independent substreams: generation parallelizes and re-runs
    reproduce the same corpus regardless of worker count.
    """
    if corpus_seed < 0 or scene_index < 0:
        raise ValueError("corpus_seed and scene_index must be non-negative")
    sequence = np.random.SeedSequence([int(corpus_seed), int(scene_index)])
    return int(sequence.generate_state(1, np.uint64)[0])


def _to_samples(seconds: float, sample_rate: int) -> int:
    return int(round(seconds * sample_rate))


def _max_simultaneous(intervals: list[tuple[int, int]]) -> int:
    """Peak number of concurrently active intervals (sample-unit, half-open)."""
    bounds: list[tuple[int, int]] = []
    for start, stop in intervals:
        bounds.append((start, 1))
        bounds.append((stop, -1))
    bounds.sort()
    active = peak = 0
    for _, step in bounds:
        active += step
        peak = max(peak, active)
    return peak


def _place_onset(
    rng: np.random.Generator,
    duration: float,
    placed: list[tuple[int, int]],
    config: SamplerConfig,
) -> float:
    """Draw an onset uniformly, rejecting placements that would exceed the
    simultaneous-event budget; bounded retries keep failure loud, not silent."""
    span = max(config.clip_length - duration, 0.0)
    for _ in range(config.max_onset_attempts):
        onset = float(rng.uniform(0.0, span)) if span > 0 else 0.0
        start = _to_samples(onset, config.sample_rate)
        stop = start + _to_samples(duration, config.sample_rate)
        if _max_simultaneous(placed + [(start, stop)]) <= config.max_simultaneous:
            return onset
    raise SceneSamplingError(
        f"could not place a {duration:.2f} s event within "
        f"{config.max_onset_attempts} attempts (simultaneity budget "
        f"{config.max_simultaneous})"
    )


def _draw_event(
    rng: np.random.Generator,
    record: SourceRecord,
    class_label: str,
    snr_range: tuple[float, float],
    placed: list[tuple[int, int]],
    constrain_overlap: bool,
    bank: RirBank,
    room_id: str,
    position_id: str,
    config: SamplerConfig,
) -> EventPlacement:
    snr_db = float(rng.uniform(*snr_range))
    duration = min(record.duration, config.clip_length)
    onset = _place_onset(rng, duration, placed if constrain_overlap else [], config)
    rir_record = select_rir(bank, room_id, position_id, rng)
    return EventPlacement(
        class_label=class_label,
        source_file=record.path,
        onset=onset,
        duration=duration,
        rir_id=rir_record.rir_id,
        snr_db=snr_db,
    )


def sample_scene(
    pool: SourcePool,
    bank: RirBank,
    seed: int,
    config: SamplerConfig = SamplerConfig(),
) -> SceneSpec:
    """Sample one constraint-satisfying scene spec, deterministically.

    Draw order (fixed; changing it changes every corpus): microphone
    position, target count, target classes, then per target its file, SNR,
    onset and RIR; then interferer count and per-interferer draws; finally
    the noise bed and its loop offset. All draws come from one PCG64 stream
    seeded with ``seed``.
    """
    rng = np.random.default_rng(int(seed))

    keys = bank.position_keys()
    if not keys:
        raise SceneSamplingError("RIR bank is empty")
    room_id, position_id = keys[int(rng.integers(len(keys)))]

    classes = pool.target_classes()
    if not classes:
        raise SceneSamplingError("source pool has no target classes")
    lo, hi = config.target_count_range
    n_targets = int(rng.integers(lo, hi + 1))
    # Distinct classes per clip: never ask for more than the pool offers.
    n_targets = min(n_targets, len(classes))
    chosen = [classes[i] for i in rng.choice(len(classes), size=n_targets, replace=False)]

    placed: list[tuple[int, int]] = []
    targets = []
    try:
        for label in chosen:
            files = pool.target_files(label)
            record = files[int(rng.integers(len(files)))]
            event = _draw_event(
                rng, record, label, config.target_snr_range, placed, True,
                bank, room_id, position_id, config,
            )
            start = _to_samples(event.onset, config.sample_rate)
            placed.append((start, start + _to_samples(event.duration, config.sample_rate)))
            targets.append(event)

        ilo, ihi = config.interferer_count_range
        n_interferers = int(rng.integers(ilo, ihi + 1))
        interferers = []
        for _ in range(n_interferers):
            if not pool.interference:
                raise SceneSamplingError("source pool has no interference events")
            record = pool.interference[int(rng.integers(len(pool.interference)))]
            label = record.class_label or "interference"
            interferers.append(
                _draw_event(
                    rng, record, label, config.interferer_snr_range, placed, False,
                    bank, room_id, position_id, config,
                )
            )

        if not pool.noise:
            raise SceneSamplingError("source pool has no noise beds")
        noise_record = pool.noise[int(rng.integers(len(pool.noise)))]
        noise_offset = float(rng.uniform(0.0, noise_record.duration))
    except RirBankError as exc:
        raise SceneSamplingError(str(exc)) from exc

    return SceneSpec(
        clip_length=config.clip_length,
        seed=int(seed),
        room_id=room_id,
        position_id=position_id,
        targets=tuple(targets),
        interferers=tuple(interferers),
        noise_file=noise_record.path,
        noise_offset=noise_offset,
        noise_gain=1.0,
    )


def _check_placement(
    placement: EventPlacement,
    where: str,
    snr_range: tuple[float, float],
    spec: SceneSpec,
    bank: RirBank,
    out: list[str],
) -> None:
    if placement.onset < 0:
        out.append(f"{where}: onset {placement.onset} < 0")
    if placement.duration <= 0:
        out.append(f"{where}: duration {placement.duration} not positive")
    if placement.onset + placement.duration > spec.clip_length + 1e-9:
        out.append(
            f"{where}: extends past the clip "
            f"({placement.onset:.6f} + {placement.duration:.6f} > {spec.clip_length})"
        )
    lo, hi = snr_range
    if not lo <= placement.snr_db <= hi:
        out.append(f"{where}: snr_db {placement.snr_db:.4f} outside [{lo}, {hi}]")
    if placement.gain is not None and not placement.gain > 0:
        out.append(f"{where}: gain {placement.gain} not positive")
    if placement.rir_id not in bank:
        out.append(f"{where}: rir '{placement.rir_id}' not in bank")
    else:
        record = bank.record(placement.rir_id)
        if (record.room_id, record.position_id) != (spec.room_id, spec.position_id):
            out.append(
                f"{where}: rir '{placement.rir_id}' is from room '{record.room_id}' "
                f"position '{record.position_id}', scene uses room '{spec.room_id}' "
                f"position '{spec.position_id}'"
            )


def validate_scene(
    spec: SceneSpec,
    pool: SourcePool,
    bank: RirBank,
    config: SamplerConfig = SamplerConfig(),
) -> list[str]:
    """Check every scene invariant; returns [] iff the spec is valid.

    Violations are data, not exceptions: each string names the field and
    the rule it breaks.
    """
    out: list[str] = []
    if spec.clip_length != config.clip_length:
        out.append(f"clip_length: {spec.clip_length} != configured {config.clip_length}")

    lo, hi = config.target_count_range
    if len(spec.targets) > hi:
        out.append(f"targets: count {len(spec.targets)} > {hi}")
    elif len(spec.targets) < lo:
        out.append(f"targets: count {len(spec.targets)} < {lo}")
    labels = [p.class_label for p in spec.targets]
    for label in sorted({x for x in labels if labels.count(x) > 1}):
        out.append(f"targets: duplicate class '{label}'")

    ilo, ihi = config.interferer_count_range
    if not ilo <= len(spec.interferers) <= ihi:
        out.append(f"interferers: count {len(spec.interferers)} outside [{ilo}, {ihi}]")

    for i, placement in enumerate(spec.targets):
        where = f"targets[{i}]"
        _check_placement(placement, where, config.target_snr_range, spec, bank, out)
        record = pool.record_for(placement.source_file)
        if record is None or record.role != "target" or record.class_label != placement.class_label:
            out.append(
                f"{where}: file '{placement.source_file}' is not a target source "
                f"of class '{placement.class_label}'"
            )
    for i, placement in enumerate(spec.interferers):
        where = f"interferers[{i}]"
        _check_placement(placement, where, config.interferer_snr_range, spec, bank, out)
        record = pool.record_for(placement.source_file)
        if record is None or record.role != "interference":
            out.append(f"{where}: file '{placement.source_file}' is not an interference source")

    intervals = [
        (
            _to_samples(p.onset, config.sample_rate),
            _to_samples(p.onset, config.sample_rate) + _to_samples(p.duration, config.sample_rate),
        )
        for p in spec.targets
    ]
    peak = _max_simultaneous(intervals)
    if peak > config.max_simultaneous:
        out.append(f"targets: {peak} events active simultaneously > {config.max_simultaneous}")

    noise_record = pool.record_for(spec.noise_file)
    if noise_record is None or noise_record.role != "noise":
        out.append(f"noise: file '{spec.noise_file}' is not a noise bed in the pool")
    if spec.noise_offset < 0:
        out.append(f"noise: offset {spec.noise_offset} < 0")
    if not spec.noise_gain > 0:
        out.append(f"noise: gain {spec.noise_gain} not positive")
    return out
