"""Command-line front door.

Subcommands wire the pipeline end to end: ``synth`` renders a corpus from a
manifest, ``eval`` scores a directory of estimates against a rendered
corpus, ``rir-split`` batch-extracts direct-path impulse responses, and
``validate`` checks a manifest. Exit codes are stable so pipelines can
branch: 0 success, 1 usage or configuration problems, 2 validation
failures, 3 processing failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import manifest as manifest_mod
from . import wavio
from .metrics import (
    ClipEstimate,
    ClipReference,
    MetricConfig,
    detection_report,
    ranking_score,
    score_clip,
)
from .render import RenderConfig, render_corpus
from .rir import RirBank, RirBankError, extract_direct_path
from .sampler import SamplerConfig, SceneSamplingError, SourcePool, sample_scene, scene_seed
from .signal import MonoClip
from .vocab import TARGET_CLASS_SET

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PROCESSING = 3

MANIFEST_ENV_VAR = "AMBISCENE_MANIFEST"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep usage errors at 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ambiscene", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="render a mixture corpus from a manifest")
    synth.add_argument("--manifest", default=os.environ.get(MANIFEST_ENV_VAR),
                       help=f"manifest JSON (default: ${MANIFEST_ENV_VAR})")
    synth.add_argument("--out", required=True, help="output corpus directory")
    synth.add_argument("--scenes", type=int, required=True, help="number of scenes")
    synth.add_argument("--seed", type=int, required=True,
                       help="corpus seed; all randomness flows from it")
    synth.add_argument("--workers", type=int, default=1)
    synth.add_argument("--split", default=None, choices=manifest_mod.SPLITS)
    synth.add_argument("--ref-channel", type=int, default=0)
    synth.add_argument("--keep-stems", action="store_true",
                       help="also write per-event wet stems")
    synth.add_argument("--no-noise", action="store_true",
                       help="render without the noise bed (unit event gains)")

    evaluate = sub.add_parser("eval", help="score estimates against a rendered corpus")
    evaluate.add_argument("--refs", required=True,
                          help="corpus directory (mixtures/ + references/)")
    evaluate.add_argument("--est", required=True,
                          help="estimates directory: <est>/<scene_id>/<class>.wav")
    evaluate.add_argument("--out", required=True, help="directory for score reports")
    evaluate.add_argument("--ref-channel", type=int, default=0)
    evaluate.add_argument("--fn-penalty", type=float, default=0.0)
    evaluate.add_argument("--fp-penalty", type=float, default=0.0)
    evaluate.add_argument("--epsilon", type=float, default=MetricConfig().epsilon)

    rir_split = sub.add_parser("rir-split",
                               help="extract direct-path impulse responses from a bank")
    rir_split.add_argument("--manifest", default=os.environ.get(MANIFEST_ENV_VAR))
    rir_split.add_argument("--out", required=True)
    rir_split.add_argument("--ref-channel", type=int, default=0)
    rir_split.add_argument("--pre-ms", type=float, default=0.5)
    rir_split.add_argument("--post-ms", type=float, default=2.0)
    rir_split.add_argument("--fade-ms", type=float, default=0.25)

    validate = sub.add_parser("validate", help="validate a manifest")
    validate.add_argument("--manifest", default=os.environ.get(MANIFEST_ENV_VAR))
    validate.add_argument("--strict", action="store_true",
                          help="also reject unknown record fields")
    return parser


def _load_manifest_checked(path_arg: str | None) -> manifest_mod.Manifest:
    if not path_arg:
        raise UsageError(f"--manifest is required (or set ${MANIFEST_ENV_VAR})")
    path = Path(path_arg)
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    return manifest_mod.load_manifest(path)


def cmd_synth(args) -> int:
    try:
        loaded = _load_manifest_checked(args.manifest)
    except manifest_mod.ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    violations = manifest_mod.validate_manifest(loaded)
    for violation in violations:
        print(violation, file=sys.stderr)
    if manifest_mod.error_count(violations):
        return EXIT_VALIDATION

    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    pool = SourcePool.from_manifest(loaded, split=args.split)
    bank = RirBank.from_manifest(loaded)
    sampler_config = SamplerConfig()
    render_config = RenderConfig(
        ref_channel=args.ref_channel,
        noise_enabled=not args.no_noise,
        keep_wet_stems=args.keep_stems,
    )
    try:
        specs = [
            sample_scene(pool, bank, scene_seed(args.seed, i), sampler_config)
            for i in range(args.scenes)
        ]
    except SceneSamplingError as exc:
        print(f"scene sampling failed: {exc}", file=sys.stderr)
        return EXIT_PROCESSING

    summary = render_corpus(specs, pool, bank, args.out, workers=args.workers,
                            config=render_config)
    for scene_name, message in summary.failures:
        print(f"scene {scene_name} failed: {message}", file=sys.stderr)
    print(
        f"rendered {summary.rendered}/{summary.total} scenes to {args.out} "
        f"in {summary.elapsed_s:.1f} s"
    )
    return EXIT_PROCESSING if summary.failures else EXIT_OK


def _read_mono_channel(path: Path, channel: int) -> MonoClip:
    data, info = wavio.read_wav(path)
    if not 0 <= channel < info.channels:
        raise ValueError(f"{path}: channel {channel} outside [0, {info.channels})")
    return MonoClip(data[channel], info.sample_rate)


def _score_one_clip(
    refs_dir: Path, est_dir: Path, scene_name: str, channel: int, config: MetricConfig
):
    mixture = _read_mono_channel(refs_dir / "mixtures" / f"{scene_name}.wav", channel)
    targets = {}
    for ref_path in sorted((refs_dir / "references" / scene_name).glob("*.wav")):
        data, info = wavio.read_wav(ref_path)
        targets[ref_path.stem] = MonoClip(data[0], info.sample_rate)
    if not targets:
        raise ValueError(f"no reference targets for scene {scene_name}")

    estimates = {}
    scene_est_dir = est_dir / scene_name
    if scene_est_dir.is_dir():
        for est_path in sorted(scene_est_dir.glob("*.wav")):
            label = est_path.stem
            if label not in TARGET_CLASS_SET:
                raise ValueError(f"{est_path}: '{label}' is not a known class name")
            # An unreadable predicted clip is a hard error, never a silent FN.
            data, info = wavio.read_wav(est_path)
            if info.channels != 1:
                raise ValueError(f"{est_path}: {info.channels} channels, expected mono")
            if data.shape[1] != len(mixture):
                raise ValueError(
                    f"{est_path}: {data.shape[1]} samples, expected {len(mixture)}"
                )
            estimates[label] = MonoClip(data[0], info.sample_rate)

    reference = ClipReference(mixture=mixture, targets=targets)
    return score_clip(reference, ClipEstimate(estimates=estimates), config)


def cmd_eval(args) -> int:
    refs_dir = Path(args.refs)
    est_dir = Path(args.est)
    if not (refs_dir / "mixtures").is_dir() or not (refs_dir / "references").is_dir():
        raise UsageError(f"{refs_dir} does not look like a rendered corpus "
                         "(needs mixtures/ and references/)")
    if not est_dir.is_dir():
        raise UsageError(f"estimates directory not found: {est_dir}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = MetricConfig(
        fn_penalty=args.fn_penalty, fp_penalty=args.fp_penalty, epsilon=args.epsilon
    )
    scene_names = sorted(p.stem for p in (refs_dir / "mixtures").glob("*.wav"))
    if not scene_names:
        print("error: no mixtures found", file=sys.stderr)
        return EXIT_PROCESSING

    scores = {}
    failures = []
    for scene_name in scene_names:
        try:
            scores[scene_name] = _score_one_clip(
                refs_dir, est_dir, scene_name, args.ref_channel, config
            )
        except (ValueError, OSError, wavio.WavFormatError) as exc:
            failures.append((scene_name, str(exc)))
            print(f"scene {scene_name} failed: {exc}", file=sys.stderr)

    if not scores:
        print("error: no clips could be scored", file=sys.stderr)
        return EXIT_PROCESSING

    score_list = [scores[name] for name in sorted(scores)]
    ranking = ranking_score(score_list)
    report = detection_report(score_list)

    clip_rows = [
        {
            "scene_id": name,
            "ca_sdri": scores[name].ca_sdri,
            "tp": scores[name].tp,
            "fn": scores[name].fn,
            "fp": scores[name].fp,
            "per_label": {
                label: {"category": entry.category, "value": entry.value}
                for label, entry in scores[name].per_label.items()
            },
        }
        for name in sorted(scores)
    ]
    (out_dir / "clip_scores.json").write_text(
        json.dumps({"version": 1, "clips": clip_rows}, indent=2) + "\n", encoding="utf-8"
    )
    with open(out_dir / "clip_scores.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "ca_sdri", "tp", "fn", "fp"])
        for row in clip_rows:
            writer.writerow([row["scene_id"], repr(row["ca_sdri"]), row["tp"], row["fn"], row["fp"]])
    (out_dir / "class_report.json").write_text(
        json.dumps(
            {
                "version": 1,
                "per_class": {
                    label: vars(tally) for label, tally in report.per_class.items()
                },
                "tp": report.tp,
                "fn": report.fn,
                "fp": report.fp,
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "macro_f1": report.macro_f1,
                "exact_match_accuracy": report.exact_match_accuracy,
                "clips": report.clips,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    (out_dir / "summary.json").write_text(
        json.dumps(
            {
                "version": 1,
                "ranking_score": ranking,
                "clips_scored": len(scores),
                "clips_failed": len(failures),
                "failures": failures,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    print(f"scored {len(scores)} clips ({len(failures)} failed)", file=sys.stderr)
    # Final stdout line is the ranking score, parseable by downstream scripts.
    print(f"{ranking:.10f}")
    return EXIT_PROCESSING if failures else EXIT_OK


def cmd_rir_split(args) -> int:
    try:
        loaded = _load_manifest_checked(args.manifest)
    except manifest_mod.ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bank = RirBank.from_manifest(loaded)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures = 0
    for record in loaded.rirs:
        try:
            rir = bank.load(record.rir_id)
            direct = extract_direct_path(
                rir,
                ref_channel=args.ref_channel,
                pre_ms=args.pre_ms,
                post_ms=args.post_ms,
                fade_ms=args.fade_ms,
            )
            wavio.write_wav(
                out_dir / f"{record.rir_id}.wav", direct.ir.samples, direct.ir.sample_rate, 32
            )
        except (RirBankError, ValueError, OSError) as exc:
            failures += 1
            print(f"rir {record.rir_id} failed: {exc}", file=sys.stderr)
    print(f"extracted {len(loaded.rirs) - failures}/{len(loaded.rirs)} direct paths to {out_dir}")
    return EXIT_PROCESSING if failures else EXIT_OK


def cmd_validate(args) -> int:
    try:
        loaded = _load_manifest_checked(args.manifest)
    except manifest_mod.ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    violations = manifest_mod.validate_manifest(loaded, strict=args.strict)
    for violation in violations:
        print(violation)
    errors = manifest_mod.error_count(violations)
    print(f"{errors} errors, {len(violations) - errors} warnings")
    return EXIT_VALIDATION if errors else EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "eval": cmd_eval,
    "rir-split": cmd_rir_split,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
