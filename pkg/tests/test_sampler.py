import dataclasses
import json

import numpy as np
import pytest

from ambiscene.manifest import SourceRecord
from ambiscene.rir import RirBank
from ambiscene.sampler import (
    SamplerConfig,
    SceneSamplingError,
    SceneSpec,
    SourcePool,
    sample_scene,
    scene_seed,
    validate_scene,
)
from test_rir import make_record

FS = 32000


def source(role, label, path, duration):
    return SourceRecord(role=role, class_label=label, path=path, duration=duration)


def tiny_pool(target_durations={"Speech": 2.0}):
    records = [
        source("target", label, f"{label.lower()}.wav", duration)
        for label, duration in target_durations.items()
    ]
    records.append(source("interference", "Extra", "extra.wav", 1.0))
    records.append(source("noise", None, "amb.wav", 12.0))
    return SourcePool(records)


def tiny_bank():
    return RirBank([make_record(f"r{i}") for i in range(3)])


class TestSceneSeed:
    def test_deterministic(self):
        assert scene_seed(7, 0) == scene_seed(7, 0)
        assert scene_seed(7, 0) != scene_seed(7, 1)
        assert scene_seed(7, 0) != scene_seed(8, 0)

    def test_fits_64_bits(self):
        for i in range(50):
            assert 0 <= scene_seed(123, i) < 2**64

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            scene_seed(-1, 0)


class TestSampleScene:
    def test_single_file_pool_forced_layout(self):
        pool = tiny_pool({"Speech": 2.0})
        bank = tiny_bank()
        for seed in range(20):
            spec = sample_scene(pool, bank, seed)
            assert len(spec.targets) == 1
            placement = spec.targets[0]
            assert placement.class_label == "Speech"
            assert 0.0 <= placement.onset <= 8.0
            assert 5.0 <= placement.snr_db <= 20.0
            assert placement.duration == 2.0
            assert len(spec.interferers) in (1, 2)

    def test_same_seed_same_json(self, assets):
        first = sample_scene(assets.pool, assets.bank, 42)
        second = sample_scene(assets.pool, assets.bank, 42)
        assert first.to_json() == second.to_json()

    def test_different_seeds_differ(self, assets):
        specs = {sample_scene(assets.pool, assets.bank, seed).to_json() for seed in range(8)}
        assert len(specs) > 1

    def test_sampled_scenes_always_validate(self, assets):
        for seed in range(50):
            spec = sample_scene(assets.pool, assets.bank, seed)
            assert validate_scene(spec, assets.pool, assets.bank) == []

    def test_long_event_truncated_to_clip(self, assets):
        # VacuumCleaner's only file is 12 s; whenever it is drawn the
        # placement must be the whole clip starting at zero.
        seen = False
        for seed in range(200):
            spec = sample_scene(assets.pool, assets.bank, seed)
            for placement in spec.targets:
                if placement.class_label == "VacuumCleaner":
                    seen = True
                    assert placement.duration == 10.0
                    assert placement.onset == 0.0
        assert seen

    def test_single_room_position_per_scene(self, assets):
        for seed in range(30):
            spec = sample_scene(assets.pool, assets.bank, seed)
            for placement in spec.targets + spec.interferers:
                record = assets.bank.record(placement.rir_id)
                assert (record.room_id, record.position_id) == (spec.room_id, spec.position_id)

    def test_target_count_distribution(self, assets):
        counts = {1: 0, 2: 0, 3: 0}
        n = 10_000
        for i in range(n):
            counts[len(sample_scene(assets.pool, assets.bank, scene_seed(99, i)).targets)] += 1
        for count in counts.values():
            assert abs(count / n - 1 / 3) < 0.02

    def test_snr_range_coverage(self, assets):
        values = []
        for i in range(3000):
            spec = sample_scene(assets.pool, assets.bank, scene_seed(5, i))
            values.extend(p.snr_db for p in spec.targets)
        values = np.asarray(values)
        assert values.min() >= 5.0 and values.max() <= 20.0
        assert (values.max() - values.min()) / 15.0 > 0.95

    def test_interferer_snr_range(self, assets):
        values = []
        for i in range(500):
            spec = sample_scene(assets.pool, assets.bank, scene_seed(6, i))
            values.extend(p.snr_db for p in spec.interferers)
        assert min(values) >= 0.0 and max(values) <= 15.0

    def test_empty_pool_fails_loudly(self):
        pool = SourcePool([source("noise", None, "amb.wav", 12.0)])
        with pytest.raises(SceneSamplingError, match="target"):
            sample_scene(pool, tiny_bank(), 0)

    def test_missing_noise_fails_loudly(self):
        pool = SourcePool([source("target", "Speech", "s.wav", 1.0),
                           source("interference", None, "i.wav", 1.0)])
        with pytest.raises(SceneSamplingError, match="noise"):
            sample_scene(pool, tiny_bank(), 0)

    def test_empty_bank_fails_loudly(self):
        with pytest.raises(SceneSamplingError, match="bank"):
            sample_scene(tiny_pool(), RirBank([]), 0)

    def test_round_trip_serialization(self, assets):
        spec = sample_scene(assets.pool, assets.bank, 7)
        restored = SceneSpec.from_dict(json.loads(spec.to_json()))
        assert restored == spec


class TestValidateScene:
    def _valid_spec(self, assets):
        return sample_scene(assets.pool, assets.bank, 3)

    def test_sampled_spec_is_clean(self, assets):
        assert validate_scene(self._valid_spec(assets), assets.pool, assets.bank) == []

    def test_too_many_targets(self, assets):
        spec = self._valid_spec(assets)
        extra = tuple(
            dataclasses.replace(spec.targets[0], class_label=label)
            for label in ("Speech", "Cough", "Doorbell", "Blender")
        )
        bad = dataclasses.replace(spec, targets=extra)
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("count 4 > 3" in v for v in violations)

    def test_duplicate_target_class(self, assets):
        spec = self._valid_spec(assets)
        twice = (spec.targets[0], spec.targets[0])
        bad = dataclasses.replace(spec, targets=twice)
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("duplicate class" in v for v in violations)

    def test_mixed_rooms_named_in_violation(self, assets):
        spec = self._valid_spec(assets)
        other_room = "roomB" if spec.room_id == "roomA" else "roomA"
        foreign = assets.bank.records_at(other_room, "p1")[0]
        bad_target = dataclasses.replace(spec.targets[0], rir_id=foreign.rir_id)
        bad = dataclasses.replace(spec, targets=(bad_target,) + spec.targets[1:])
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any(spec.room_id in v and other_room in v for v in violations)

    def test_snr_out_of_range(self, assets):
        spec = self._valid_spec(assets)
        hot = dataclasses.replace(spec.targets[0], snr_db=35.0)
        bad = dataclasses.replace(spec, targets=(hot,) + spec.targets[1:])
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("snr_db" in v for v in violations)

    def test_event_past_clip_end(self, assets):
        spec = self._valid_spec(assets)
        late = dataclasses.replace(spec.targets[0], onset=9.5, duration=1.0)
        bad = dataclasses.replace(spec, targets=(late,) + spec.targets[1:])
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("past the clip" in v for v in violations)

    def test_unknown_source_file(self, assets):
        spec = self._valid_spec(assets)
        ghost = dataclasses.replace(spec.targets[0], source_file="events/ghost.wav")
        bad = dataclasses.replace(spec, targets=(ghost,) + spec.targets[1:])
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("ghost.wav" in v for v in violations)

    def test_interferer_count_out_of_range(self, assets):
        spec = self._valid_spec(assets)
        bad = dataclasses.replace(spec, interferers=())
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("interferers: count" in v for v in violations)

    def test_relaxed_config_admits_diagnostic_scenes(self, assets):
        spec = self._valid_spec(assets)
        diagnostic = dataclasses.replace(spec, interferers=())
        config = SamplerConfig(interferer_count_range=(0, 2))
        assert validate_scene(diagnostic, assets.pool, assets.bank, config) == []

    def test_overlap_budget(self, assets):
        spec = self._valid_spec(assets)
        stacked = tuple(
            dataclasses.replace(
                spec.targets[0], class_label=label, onset=1.0, duration=2.0
            )
            for label in ("Speech", "Cough", "Doorbell")
        )
        tight = dataclasses.replace(spec, targets=stacked)
        config = SamplerConfig(max_simultaneous=2)
        violations = validate_scene(tight, assets.pool, assets.bank, config)
        assert any("simultaneous" in v for v in violations)

    def test_noise_not_in_pool(self, assets):
        spec = self._valid_spec(assets)
        bad = dataclasses.replace(spec, noise_file="noise/ghost.wav")
        violations = validate_scene(bad, assets.pool, assets.bank)
        assert any("noise" in v for v in violations)


class TestOnsetRejection:
    def test_unsatisfiable_budget_fails_with_diagnostic(self):
        # Three 10-second targets cannot satisfy a budget of one.
        pool = tiny_pool({"Speech": 10.0, "Cough": 10.0, "Doorbell": 10.0})
        bank = tiny_bank()
        config = SamplerConfig(max_simultaneous=1, target_count_range=(3, 3))
        with pytest.raises(SceneSamplingError, match="attempts"):
            for seed in range(20):
                sample_scene(pool, bank, seed, config)
