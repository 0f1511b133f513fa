"""Dataset manifest loading and validation.

A manifest is a single JSON document listing the source pool (target events,
interference events, noise beds) and the RIR collection, with paths resolved
relative to the manifest's directory. Unknown fields are preserved on read
and only rejected by strict validation, so downstream metadata growth does
not break older toolkits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import wavio
from .signal import TOOLKIT_SAMPLE_RATE
from .vocab import TARGET_CLASS_SET

MANIFEST_VERSION = 1

ROLES = ("target", "interference", "noise")
SPLITS = ("train", "valid", "test")

RIR_AZIMUTHS = frozenset(range(0, 360, 20))
RIR_ELEVATIONS = frozenset((-20, 0, 20))
RIR_DISTANCE_RANGE = (0.75, 1.50)

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    severity: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


@dataclass(frozen=True)
class SourceRecord:
    """One audio asset in the pool. ``path`` is manifest-relative."""

    role: str
    class_label: str | None
    path: str
    duration: float
    split: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RirRecord:
    """One measured impulse response with its source-microphone geometry."""

    rir_id: str
    path: str
    room_id: str
    position_id: str
    azimuth_deg: float
    elevation_deg: float
    distance_m: float
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Manifest:
    version: int
    root: Path
    sources: list[SourceRecord]
    rirs: list[RirRecord]
    extra: dict = field(default_factory=dict)

    def resolve(self, relative_path: str) -> Path:
        return self.root / relative_path


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise ManifestError(f"{where}: missing required field '{key}'")
    return record[key]


def _split_known(record: dict, known: tuple[str, ...]) -> dict:
    return {k: v for k, v in record.items() if k not in known}


_SOURCE_FIELDS = ("role", "class", "path", "duration", "split")
_RIR_FIELDS = ("id", "path", "room_id", "position_id", "azimuth_deg", "elevation_deg", "distance_m")


def load_manifest(path: str | Path) -> Manifest:
    """Parse a manifest JSON file; schema errors raise ManifestError."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ManifestError(f"manifest {path} must be a JSON object")
    version = document.get("version")
    if version != MANIFEST_VERSION:
        raise ManifestError(f"manifest version {version!r} not supported (expected {MANIFEST_VERSION})")

    sources = []
    for i, record in enumerate(document.get("sources", [])):
        where = f"sources[{i}]"
        if not isinstance(record, dict):
            raise ManifestError(f"{where}: not a JSON object")
        sources.append(
            SourceRecord(
                role=str(_require(record, "role", where)),
                class_label=record.get("class"),
                path=str(_require(record, "path", where)),
                duration=float(_require(record, "duration", where)),
                split=record.get("split"),
                extra=_split_known(record, _SOURCE_FIELDS),
            )
        )
    rirs = []
    for i, record in enumerate(document.get("rirs", [])):
        where = f"rirs[{i}]"
        if not isinstance(record, dict):
            raise ManifestError(f"{where}: not a JSON object")
        rirs.append(
            RirRecord(
                rir_id=str(_require(record, "id", where)),
                path=str(_require(record, "path", where)),
                room_id=str(_require(record, "room_id", where)),
                position_id=str(_require(record, "position_id", where)),
                azimuth_deg=float(_require(record, "azimuth_deg", where)),
                elevation_deg=float(_require(record, "elevation_deg", where)),
                distance_m=float(_require(record, "distance_m", where)),
                extra=_split_known(record, _RIR_FIELDS),
            )
        )
    extra = {k: v for k, v in document.items() if k not in ("version", "sources", "rirs")}
    return Manifest(version=int(version), root=path.parent.resolve(), sources=sources, rirs=rirs, extra=extra)


def _check_audio(manifest: Manifest, rel_path: str, expected_channels: int, where: str,
                 out: list[Violation]) -> None:
    full = manifest.resolve(rel_path)
    if not full.is_file():
        out.append(Violation(SEVERITY_ERROR, f"{where}: file not found: {rel_path}"))
        return
    try:
        info = wavio.probe_wav(full)
    except wavio.WavFormatError as exc:
        out.append(Violation(SEVERITY_ERROR, f"{where}: unreadable audio {rel_path}: {exc}"))
        return
    if info.channels != expected_channels:
        out.append(
            Violation(
                SEVERITY_ERROR,
                f"{where}: {rel_path} has {info.channels} channels, expected {expected_channels}",
            )
        )
    if info.sample_rate != TOOLKIT_SAMPLE_RATE:
        out.append(
            Violation(
                SEVERITY_ERROR,
                f"{where}: {rel_path} sample_rate {info.sample_rate} != {TOOLKIT_SAMPLE_RATE}",
            )
        )


def validate_manifest(manifest: Manifest, strict: bool = False) -> list[Violation]:
    """Cross-check every record; returns the complete list of violations.

    Checks cover duplicate ids/paths, role and split values, target class
    vocabulary, file existence, channel counts (mono events, 4-channel
    RIR/noise) and the 32 kHz rate. RIR geometry outside the measured
    domains is reported as a warning, not an error, so user-supplied banks
    still validate. With ``strict``, unknown record fields are errors.
    """
    out: list[Violation] = []

    seen_paths: set[str] = set()
    for i, record in enumerate(manifest.sources):
        where = f"sources[{i}]"
        if record.role not in ROLES:
            out.append(Violation(SEVERITY_ERROR, f"{where}: role '{record.role}' not in {ROLES}"))
        if record.role == "target" and record.class_label not in TARGET_CLASS_SET:
            out.append(
                Violation(
                    SEVERITY_ERROR,
                    f"{where}: class '{record.class_label}' not in the target vocabulary",
                )
            )
        if record.split is not None and record.split not in SPLITS:
            out.append(Violation(SEVERITY_ERROR, f"{where}: split '{record.split}' not in {SPLITS}"))
        if not record.duration > 0:
            out.append(Violation(SEVERITY_ERROR, f"{where}: duration {record.duration} not positive"))
        if record.path in seen_paths:
            out.append(Violation(SEVERITY_ERROR, f"{where}: duplicate source path '{record.path}'"))
        seen_paths.add(record.path)
        if strict and record.extra:
            out.append(
                Violation(SEVERITY_ERROR, f"{where}: unknown fields {sorted(record.extra)}")
            )
        channels = 4 if record.role == "noise" else 1
        _check_audio(manifest, record.path, channels, where, out)

    seen_ids: set[str] = set()
    for i, record in enumerate(manifest.rirs):
        where = f"rirs[{i}]"
        if record.rir_id in seen_ids:
            out.append(Violation(SEVERITY_ERROR, f"{where}: duplicate rir id '{record.rir_id}'"))
        seen_ids.add(record.rir_id)
        if record.azimuth_deg not in RIR_AZIMUTHS:
            out.append(
                Violation(
                    SEVERITY_WARNING,
                    f"{where}: azimuth {record.azimuth_deg} outside the measured 20-degree grid",
                )
            )
        if record.elevation_deg not in RIR_ELEVATIONS:
            out.append(
                Violation(
                    SEVERITY_WARNING,
                    f"{where}: elevation {record.elevation_deg} not in {sorted(RIR_ELEVATIONS)}",
                )
            )
        lo, hi = RIR_DISTANCE_RANGE
        if not lo <= record.distance_m <= hi:
            out.append(
                Violation(
                    SEVERITY_WARNING,
                    f"{where}: distance {record.distance_m} m outside [{lo}, {hi}] m",
                )
            )
        if strict and record.extra:
            out.append(Violation(SEVERITY_ERROR, f"{where}: unknown fields {sorted(record.extra)}"))
        _check_audio(manifest, record.path, 4, where, out)

    if strict and manifest.extra:
        out.append(Violation(SEVERITY_ERROR, f"manifest: unknown top-level fields {sorted(manifest.extra)}"))
    return out


def error_count(violations: list[Violation]) -> int:
    return sum(1 for v in violations if v.severity == SEVERITY_ERROR)
