"""Scene rendering: turn a scene spec into the mixture, references and metadata.

Each event is loaded, truncated with a short fade if it outruns the clip,
convolved with its room impulse response, gain-scaled so its wet W-channel
RMS over the event's active extent hits the specified SNR against the
noise bed, and placed at its onset. Targets additionally produce a mono
direct-path reference through the windowed RIR, carrying the same gain as
the wet stem so the reference sits at in-mixture level. If the summed
mixture would exceed the peak ceiling, the whole scene is scaled down by a
common factor recorded in the metadata, which preserves every SNR
relationship.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import wavio
from .rir import (
    DEFAULT_FADE_MS,
    DEFAULT_POST_MS,
    DEFAULT_PRE_MS,
    DEFAULT_REF_CHANNEL,
    RirBank,
    RirBankError,
    extract_direct_path,
)
from .sampler import EventPlacement, SceneSpec, SourcePool
from .signal import (
    TOOLKIT_SAMPLE_RATE,
    FoaClip,
    MonoClip,
    convolve_full,
    gain_for_snr,
)

METADATA_VERSION = 1
SCENE_ID_DIGITS = 5


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderConfig:
    """Rendering policy knobs.

    ``peak_limit_dbfs`` is the mixture peak ceiling (None disables the
    global scale-down); ``noise_enabled=False`` renders dry scenes with
    unit event gains, useful for diagnostics and exact-identity tests.
    """

    ref_channel: int = DEFAULT_REF_CHANNEL
    noise_enabled: bool = True
    peak_limit_dbfs: float | None = -1.0
    keep_wet_stems: bool = False
    direct_path_pre_ms: float = DEFAULT_PRE_MS
    direct_path_post_ms: float = DEFAULT_POST_MS
    direct_path_fade_ms: float = DEFAULT_FADE_MS
    truncation_fade_ms: float = 10.0


@dataclass(frozen=True)
class RenderedScene:
    """One rendered clip: the 4-channel mixture, per-target mono references,
    optional wet stems, and the resolved gain bookkeeping."""

    mixture: FoaClip
    references: dict[str, MonoClip]
    wet_stems: dict[str, FoaClip]
    interference_stems: tuple[FoaClip, ...]
    spec: SceneSpec
    gains: dict[str, float]
    interference_gains: tuple[float, ...]
    scale: float
    ref_channel: int

    def metadata_dict(self, scene_id: str) -> dict:
        return {
            "version": METADATA_VERSION,
            "scene_id": scene_id,
            "spec": self.spec.to_dict(),
            "gains": {label: self.gains[label] for label in sorted(self.gains)},
            "interference_gains": list(self.interference_gains),
            "scale": self.scale,
            "ref_channel": self.ref_channel,
        }


@dataclass(frozen=True)
class CorpusSummary:
    total: int
    rendered: int
    failures: tuple[tuple[str, str], ...]
    elapsed_s: float


def _load_mono(pool: SourcePool, rel_path: str) -> np.ndarray:
    path = pool.resolve(rel_path)
    try:
        data, info = wavio.read_wav(path)
    except (OSError, wavio.WavFormatError) as exc:
        raise RenderError(f"cannot read source '{rel_path}': {exc}") from exc
    if info.channels != 1:
        raise RenderError(f"source '{rel_path}' has {info.channels} channels, expected mono")
    if info.sample_rate != TOOLKIT_SAMPLE_RATE:
        raise RenderError(
            f"source '{rel_path}' sample_rate {info.sample_rate} != {TOOLKIT_SAMPLE_RATE}"
        )
    return data[0]


def _load_noise_bed(pool: SourcePool, spec: SceneSpec, clip_samples: int) -> np.ndarray:
    path = pool.resolve(spec.noise_file)
    try:
        data, info = wavio.read_wav(path)
    except (OSError, wavio.WavFormatError) as exc:
        raise RenderError(f"cannot read noise bed '{spec.noise_file}': {exc}") from exc
    if info.channels != 4:
        raise RenderError(
            f"noise bed '{spec.noise_file}' has {info.channels} channels, expected 4"
        )
    if info.sample_rate != TOOLKIT_SAMPLE_RATE:
        raise RenderError(
            f"noise bed '{spec.noise_file}' sample_rate {info.sample_rate} != {TOOLKIT_SAMPLE_RATE}"
        )
    length = data.shape[1]
    if length < 1:
        raise RenderError(f"noise bed '{spec.noise_file}' is empty")
    offset = int(round(spec.noise_offset * TOOLKIT_SAMPLE_RATE)) % length
    # Loop or crop to the clip, starting at the offset and wrapping around.
    indices = (offset + np.arange(clip_samples)) % length
    return data[:, indices] * spec.noise_gain


def _truncation_fade(cut: np.ndarray, fade_ms: float) -> np.ndarray:
    fade_n = int(round(fade_ms * TOOLKIT_SAMPLE_RATE / 1000.0))
    fade_n = min(fade_n, cut.size)
    if fade_n <= 0:
        return cut
    out = cut.copy()
    ramp = 0.5 + 0.5 * np.cos(np.pi * np.arange(1, fade_n + 1) / (fade_n + 1))
    out[-fade_n:] *= ramp
    return out


def _render_event(
    placement: EventPlacement,
    pool: SourcePool,
    bank: RirBank,
    noise_rms: float | None,
    clip_samples: int,
    config: RenderConfig,
    want_reference: bool,
) -> tuple[np.ndarray, np.ndarray | None, float]:
    """Render one event; returns (wet stem (4, T), reference (T,) or None, gain)."""
    dry = _load_mono(pool, placement.source_file)
    dur_n = int(round(placement.duration * TOOLKIT_SAMPLE_RATE))
    if dur_n < 1:
        raise RenderError(
            f"event duration {placement.duration} s is below one sample "
            f"for '{placement.source_file}'"
        )
    if dur_n > dry.size + 1:
        raise RenderError(
            f"source '{placement.source_file}' is {dry.size} samples, "
            f"shorter than the placed duration of {dur_n}"
        )
    dur_n = min(dur_n, dry.size)
    cut = dry[:dur_n]
    if dur_n < dry.size:
        cut = _truncation_fade(cut, config.truncation_fade_ms)

    try:
        rir = bank.load(placement.rir_id)
    except RirBankError as exc:
        raise RenderError(str(exc)) from exc
    if rir.sample_rate != TOOLKIT_SAMPLE_RATE:
        raise RenderError(
            f"rir '{placement.rir_id}' sample_rate {rir.sample_rate} != {TOOLKIT_SAMPLE_RATE}"
        )

    onset_n = int(round(placement.onset * TOOLKIT_SAMPLE_RATE))
    if onset_n >= clip_samples:
        raise RenderError(f"event onset {placement.onset} s lies outside the clip")

    stem = np.zeros((4, clip_samples))
    span = min(clip_samples - onset_n, dur_n + len(rir.ir) - 1)
    for channel in range(4):
        wet = convolve_full(cut, rir.ir.channels[channel])
        stem[channel, onset_n:onset_n + span] = wet[:span]

    active_stop = min(onset_n + dur_n, clip_samples)
    active = stem[0, onset_n:active_stop]
    wet_rms = float(np.sqrt(np.mean(np.square(active))))

    if placement.gain is not None:
        gain = placement.gain
    elif noise_rms is None:
        gain = 1.0
    else:
        try:
            gain = gain_for_snr(wet_rms, noise_rms, placement.snr_db)
        except ValueError as exc:
            raise RenderError(f"cannot set SNR for '{placement.source_file}': {exc}") from exc
    stem *= gain

    reference = None
    if want_reference:
        direct = extract_direct_path(
            rir,
            ref_channel=config.ref_channel,
            pre_ms=config.direct_path_pre_ms,
            post_ms=config.direct_path_post_ms,
            fade_ms=config.direct_path_fade_ms,
        )
        wet_direct = convolve_full(cut, direct.ir.samples)
        reference = np.zeros(clip_samples)
        reference[onset_n:onset_n + span] = wet_direct[:span]
        reference *= gain

    return stem, reference, gain


def render_scene(
    spec: SceneSpec,
    pool: SourcePool,
    bank: RirBank,
    config: RenderConfig = RenderConfig(),
) -> RenderedScene:
    """Render a scene spec into its mixture, references and resolved gains.

    The caller is expected to have validated the spec (validate_scene);
    render itself only raises RenderError for structural problems it cannot
    work around, always naming the offending asset.
    """
    clip_samples = int(round(spec.clip_length * TOOLKIT_SAMPLE_RATE))
    if clip_samples < 1:
        raise RenderError(f"clip_length {spec.clip_length} too short")

    if config.noise_enabled:
        bed = _load_noise_bed(pool, spec, clip_samples)
        noise_rms: float | None = float(np.sqrt(np.mean(np.square(bed[0]))))
        if noise_rms == 0.0:
            raise RenderError(f"noise bed '{spec.noise_file}' is silent on the W channel")
    else:
        bed = np.zeros((4, clip_samples))
        noise_rms = None

    target_stems: list[np.ndarray] = []
    references: list[np.ndarray] = []
    gains: dict[str, float] = {}
    for placement in spec.targets:
        stem, reference, gain = _render_event(
            placement, pool, bank, noise_rms, clip_samples, config, want_reference=True
        )
        target_stems.append(stem)
        references.append(reference)
        gains[placement.class_label] = gain

    interference_stems: list[np.ndarray] = []
    interference_gains: list[float] = []
    for placement in spec.interferers:
        stem, _, gain = _render_event(
            placement, pool, bank, noise_rms, clip_samples, config, want_reference=False
        )
        interference_stems.append(stem)
        interference_gains.append(gain)

    mixture = bed.copy()
    for stem in target_stems:
        mixture += stem
    for stem in interference_stems:
        mixture += stem

    scale = 1.0
    if config.peak_limit_dbfs is not None:
        limit = 10.0 ** (config.peak_limit_dbfs / 20.0)
        peak = float(np.max(np.abs(mixture))) if mixture.size else 0.0
        if peak > limit:
            scale = limit / peak
            bed = bed * scale
            target_stems = [stem * scale for stem in target_stems]
            interference_stems = [stem * scale for stem in interference_stems]
            references = [ref * scale for ref in references]
            # Re-sum the scaled components so the mixture stays the exact
            # sample-wise sum of what we report as stems and noise.
            mixture = bed.copy()
            for stem in target_stems:
                mixture += stem
            for stem in interference_stems:
                mixture += stem

    rate = TOOLKIT_SAMPLE_RATE
    return RenderedScene(
        mixture=FoaClip(mixture, rate),
        references={
            p.class_label: MonoClip(ref, rate) for p, ref in zip(spec.targets, references)
        },
        wet_stems=(
            {p.class_label: FoaClip(stem, rate) for p, stem in zip(spec.targets, target_stems)}
            if config.keep_wet_stems
            else {}
        ),
        interference_stems=(
            tuple(FoaClip(stem, rate) for stem in interference_stems)
            if config.keep_wet_stems
            else ()
        ),
        spec=spec,
        gains=gains,
        interference_gains=tuple(interference_gains),
        scale=scale,
        ref_channel=config.ref_channel,
    )


def scene_id_for(index: int) -> str:
    return f"{index:0{SCENE_ID_DIGITS}d}"


def write_rendered_scene(
    scene: RenderedScene, scene_id: str, out_dir: str | Path, config: RenderConfig
) -> None:
    """Write one scene into the corpus layout:

    mixtures/<id>.wav (4-channel, 16-bit), references/<id>/<class>.wav
    (mono, 16-bit), metadata/<id>.json, and stems/<id>/... when wet stems
    are kept.
    """
    out_dir = Path(out_dir)
    rate = scene.mixture.sample_rate

    mixtures = out_dir / "mixtures"
    mixtures.mkdir(parents=True, exist_ok=True)
    wavio.write_wav(mixtures / f"{scene_id}.wav", scene.mixture.channels, rate, 16)

    ref_dir = out_dir / "references" / scene_id
    ref_dir.mkdir(parents=True, exist_ok=True)
    for label, clip in scene.references.items():
        wavio.write_wav(ref_dir / f"{label}.wav", clip.samples, rate, 16)

    metadata_dir = out_dir / "metadata"
    metadata_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(scene.metadata_dict(scene_id), indent=2) + "\n"
    (metadata_dir / f"{scene_id}.json").write_text(payload, encoding="utf-8")

    if config.keep_wet_stems:
        stem_dir = out_dir / "stems" / scene_id
        stem_dir.mkdir(parents=True, exist_ok=True)
        for label, stem in scene.wet_stems.items():
            wavio.write_wav(stem_dir / f"{label}.wav", stem.channels, rate, 16)
        for i, stem in enumerate(scene.interference_stems):
            wavio.write_wav(stem_dir / f"interference_{i}.wav", stem.channels, rate, 16)


def _render_one(args) -> tuple[str, str | None]:
    scene_id, spec, pool, bank, out_dir, config = args
    try:
        scene = render_scene(spec, pool, bank, config)
        write_rendered_scene(scene, scene_id, out_dir, config)
        return scene_id, None
    except (RenderError, RirBankError, OSError, ValueError) as exc:
        return scene_id, str(exc)


def render_corpus(
    specs: list[SceneSpec],
    pool: SourcePool,
    bank: RirBank,
    out_dir: str | Path,
    workers: int = 1,
    config: RenderConfig = RenderConfig(),
) -> CorpusSummary:
    """Render every spec into ``out_dir``; scene ids are zero-padded indices.

    Scenes are independent, so the output tree is byte-identical for any
    worker count. Failures are collected per scene and never abort the
    rest of the corpus.
    """
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (scene_id_for(i), spec, pool, bank, out_dir, config) for i, spec in enumerate(specs)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_render_one, tasks))
    else:
        results = [_render_one(task) for task in tasks]
    failures = tuple((scene_id, msg) for scene_id, msg in results if msg is not None)
    return CorpusSummary(
        total=len(specs),
        rendered=len(specs) - len(failures),
        failures=failures,
        elapsed_s=time.monotonic() - started,
    )
