"""Shared synthetic-asset fixtures.

Builds a small but complete dataset (dry events, interference, FOA noise
beds, a multi-room RIR bank, manifest) in a session-scoped temp directory
so pipeline tests never depend on external audio.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from ambiscene import wavio
from ambiscene.manifest import Manifest, load_manifest
from ambiscene.rir import RirBank
from ambiscene.sampler import SourcePool

SAMPLE_RATE = 32000


def am_tone(duration_s: float, freq_hz: float, amp: float = 0.35,
            mod_hz: float = 3.0) -> np.ndarray:
    t = np.arange(int(round(duration_s * SAMPLE_RATE))) / SAMPLE_RATE
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * mod_hz * t)
    return amp * envelope * np.sin(2 * np.pi * freq_hz * t)


def synthetic_rir(direct_index: int = 12, length: int = 480, tail_amp: float = 0.05,
                  direct_gains=(1.0, 0.5, 0.2, 0.7), seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ir = np.zeros((4, length))
    ir[:, direct_index] = direct_gains
    tail = rng.normal(0.0, tail_amp, (4, length - direct_index - 40))
    tail *= np.exp(-np.arange(tail.shape[1]) / 60.0)
    ir[:, direct_index + 40:] = tail
    return ir


def write_corpus_assets(root: Path, seed: int = 2024) -> Path:
    """Create events, noise beds, RIRs and the manifest under ``root``.

    Returns the manifest path.
    """
    rng = np.random.default_rng(seed)
    (root / "events").mkdir(parents=True)
    (root / "noise").mkdir()
    (root / "rirs").mkdir()

    sources = []
    target_recipe = {
        "Speech": [(1.2, 320.0), (2.0, 260.0)],
        "Cough": [(0.8, 700.0), (1.4, 640.0)],
        "Doorbell": [(1.0, 1100.0)],
        "Blender": [(2.5, 180.0)],
    }
    for label, variants in target_recipe.items():
        for i, (duration, freq) in enumerate(variants):
            rel = f"events/{label.lower()}_{i}.wav"
            samples = am_tone(duration, freq)
            wavio.write_wav(root / rel, samples, SAMPLE_RATE, 16)
            sources.append(
                {
                    "role": "target",
                    "class": label,
                    "path": rel,
                    "duration": len(samples) / SAMPLE_RATE,
                    "split": "train",
                }
            )
    # One target class longer than the clip, to exercise truncation.
    long_samples = 0.2 * rng.normal(0.0, 1.0, 12 * SAMPLE_RATE)
    long_samples = np.clip(long_samples, -0.9, 0.9)
    wavio.write_wav(root / "events/vacuumcleaner_0.wav", long_samples, SAMPLE_RATE, 16)
    sources.append(
        {
            "role": "target",
            "class": "VacuumCleaner",
            "path": "events/vacuumcleaner_0.wav",
            "duration": len(long_samples) / SAMPLE_RATE,
            "split": "train",
        }
    )

    for i, (duration, freq) in enumerate([(0.9, 1900.0), (1.3, 90.0)]):
        rel = f"events/interference_{i}.wav"
        samples = am_tone(duration, freq, amp=0.3)
        wavio.write_wav(root / rel, samples, SAMPLE_RATE, 16)
        sources.append(
            {
                "role": "interference",
                "class": f"Extra{i}",
                "path": rel,
                "duration": len(samples) / SAMPLE_RATE,
                "split": "train",
            }
        )

    for name, duration in [("amb_long", 12.0), ("amb_short", 4.0)]:
        rel = f"noise/{name}.wav"
        bed = rng.normal(0.0, 0.02, (4, int(duration * SAMPLE_RATE)))
        wavio.write_wav(root / rel, bed, SAMPLE_RATE, 16)
        sources.append(
            {
                "role": "noise",
                "class": None,
                "path": rel,
                "duration": duration,
                "split": "train",
            }
        )

    rirs = []
    layout = [("roomA", "p1", 6), ("roomA", "p2", 4), ("roomB", "p1", 4)]
    rir_seed = 100
    for room, position, count in layout:
        for i in range(count):
            rir_seed += 1
            rel = f"rirs/{room}_{position}_{i}.wav"
            ir = synthetic_rir(seed=rir_seed)
            wavio.write_wav(root / rel, ir, SAMPLE_RATE, 32)
            rirs.append(
                {
                    "id": f"{room}_{position}_{i}",
                    "path": rel,
                    "room_id": room,
                    "position_id": position,
                    "azimuth_deg": (i * 20) % 360,
                    "elevation_deg": (-20, 0, 20)[i % 3],
                    "distance_m": 0.75 + 0.15 * (i % 5),
                }
            )

    manifest_path = root / "manifest.json"
    manifest_path.write_text(
        json.dumps({"version": 1, "sources": sources, "rirs": rirs}, indent=2),
        encoding="utf-8",
    )
    return manifest_path


@dataclass(frozen=True)
class Assets:
    root: Path
    manifest_path: Path
    manifest: Manifest
    pool: SourcePool
    bank: RirBank


@pytest.fixture(scope="session")
def assets(tmp_path_factory) -> Assets:
    root = tmp_path_factory.mktemp("assets")
    manifest_path = write_corpus_assets(root)
    manifest = load_manifest(manifest_path)
    return Assets(
        root=root,
        manifest_path=manifest_path,
        manifest=manifest,
        pool=SourcePool.from_manifest(manifest),
        bank=RirBank.from_manifest(manifest),
    )


def tree_digest(root: Path) -> str:
    """SHA-256 over relative paths and file bytes of a directory tree."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()
