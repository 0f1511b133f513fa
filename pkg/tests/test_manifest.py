import json

import numpy as np
import pytest

from ambiscene import wavio
from ambiscene.manifest import (
    ManifestError,
    error_count,
    load_manifest,
    validate_manifest,
)

FS = 32000


def write_manifest(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def minimal_document():
    return {"version": 1, "sources": [], "rirs": []}


class TestLoadManifest:
    def test_fixture_manifest_loads(self, assets):
        assert assets.manifest.version == 1
        assert len(assets.manifest.sources) > 0
        assert len(assets.manifest.rirs) > 0
        assert assets.manifest.root == assets.root.resolve()

    def test_fixture_manifest_has_no_errors(self, assets):
        violations = validate_manifest(assets.manifest)
        assert error_count(violations) == 0
        assert violations == []

    def test_unknown_fields_preserved(self, tmp_path):
        document = minimal_document()
        document["sources"] = [
            {"role": "noise", "class": None, "path": "n.wav", "duration": 1.0,
             "recording_rig": "ambeo"}
        ]
        document["campaign"] = "2025"
        manifest = load_manifest(write_manifest(tmp_path / "m.json", document))
        assert manifest.sources[0].extra == {"recording_rig": "ambeo"}
        assert manifest.extra == {"campaign": "2025"}

    def test_missing_field_rejected(self, tmp_path):
        document = minimal_document()
        document["sources"] = [{"role": "target", "class": "Speech", "duration": 1.0}]
        with pytest.raises(ManifestError, match="path"):
            load_manifest(write_manifest(tmp_path / "m.json", document))

    def test_bad_version_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="version"):
            load_manifest(write_manifest(tmp_path / "m.json", {"version": 99}))

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ManifestError, match="JSON"):
            load_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "absent.json")


class TestValidateManifest:
    def _manifest_with_sources(self, tmp_path, sources, rirs=()):
        document = {"version": 1, "sources": sources, "rirs": list(rirs)}
        return load_manifest(write_manifest(tmp_path / "m.json", document))

    def test_unknown_class_is_vocab_violation(self, tmp_path):
        wav = tmp_path / "w.wav"
        wavio.write_wav(wav, np.zeros(100) + 0.1, FS, 16)
        manifest = self._manifest_with_sources(
            tmp_path,
            [{"role": "target", "class": "Whistle", "path": "w.wav", "duration": 0.1}],
        )
        violations = validate_manifest(manifest)
        assert error_count(violations) == 1
        assert "vocabulary" in violations[0].message

    def test_mono_rir_is_channel_violation(self, tmp_path):
        wav = tmp_path / "r.wav"
        wavio.write_wav(wav, np.zeros(100) + 0.1, FS, 16)
        manifest = self._manifest_with_sources(
            tmp_path,
            [],
            [{"id": "r0", "path": "r.wav", "room_id": "a", "position_id": "p",
              "azimuth_deg": 0, "elevation_deg": 0, "distance_m": 1.0}],
        )
        violations = validate_manifest(manifest)
        assert error_count(violations) == 1
        assert "channels" in violations[0].message

    def test_wrong_sample_rate_named(self, tmp_path):
        wav = tmp_path / "w.wav"
        wavio.write_wav(wav, np.zeros(100) + 0.1, 44100, 16)
        manifest = self._manifest_with_sources(
            tmp_path,
            [{"role": "target", "class": "Speech", "path": "w.wav", "duration": 0.1}],
        )
        violations = validate_manifest(manifest)
        assert error_count(violations) == 1
        assert "44100" in violations[0].message and "32000" in violations[0].message

    def test_geometry_out_of_domain_is_warning_only(self, tmp_path):
        wav = tmp_path / "r.wav"
        wavio.write_wav(wav, np.ones((4, 100)) * 0.1, FS, 16)
        manifest = self._manifest_with_sources(
            tmp_path,
            [],
            [{"id": "r0", "path": "r.wav", "room_id": "a", "position_id": "p",
              "azimuth_deg": 13, "elevation_deg": 45, "distance_m": 9.0}],
        )
        violations = validate_manifest(manifest)
        assert error_count(violations) == 0
        assert len(violations) == 3
        assert all(v.severity == "warning" for v in violations)

    def test_independent_faults_all_reported(self, tmp_path):
        wav = tmp_path / "ok.wav"
        wavio.write_wav(wav, np.zeros(100) + 0.1, FS, 16)
        sources = [
            # fault 1: bad role
            {"role": "foreground", "class": "Speech", "path": "ok.wav", "duration": 0.1},
            # fault 2: missing file
            {"role": "target", "class": "Speech", "path": "gone.wav", "duration": 0.1},
            # fault 3: bad class, fault 4: duplicate path
            {"role": "target", "class": "Santur", "path": "ok.wav", "duration": 0.1},
            # fault 5: non-positive duration
            {"role": "interference", "class": None, "path": "dup2.wav", "duration": 0.0},
        ]
        wavio.write_wav(tmp_path / "dup2.wav", np.zeros(100) + 0.1, FS, 16)
        manifest = self._manifest_with_sources(tmp_path, sources)
        violations = validate_manifest(manifest)
        assert error_count(violations) == 5

    def test_duplicate_rir_ids(self, tmp_path):
        wav = tmp_path / "r.wav"
        wavio.write_wav(wav, np.ones((4, 100)) * 0.1, FS, 16)
        record = {"id": "dup", "path": "r.wav", "room_id": "a", "position_id": "p",
                  "azimuth_deg": 0, "elevation_deg": 0, "distance_m": 1.0}
        manifest = self._manifest_with_sources(tmp_path, [], [record, dict(record)])
        violations = validate_manifest(manifest)
        assert error_count(violations) == 1
        assert "duplicate" in violations[0].message

    def test_strict_rejects_unknown_fields(self, tmp_path):
        wav = tmp_path / "n.wav"
        wavio.write_wav(wav, np.ones((4, 100)) * 0.1, FS, 16)
        manifest = self._manifest_with_sources(
            tmp_path,
            [{"role": "noise", "class": None, "path": "n.wav", "duration": 0.1,
              "rig": "x"}],
        )
        assert error_count(validate_manifest(manifest)) == 0
        strict = validate_manifest(manifest, strict=True)
        assert error_count(strict) == 1
        assert "unknown fields" in strict[0].message

    def test_corrupt_audio_named(self, tmp_path):
        (tmp_path / "bad.wav").write_bytes(b"not audio at all")
        manifest = self._manifest_with_sources(
            tmp_path,
            [{"role": "target", "class": "Speech", "path": "bad.wav", "duration": 0.1}],
        )
        violations = validate_manifest(manifest)
        assert error_count(violations) == 1
        assert "unreadable" in violations[0].message
