"""Class-aware SDR-improvement scoring.

Estimated and reference sources are aligned by class label: a correctly
predicted label contributes its SDR improvement over the unprocessed
mixture, a missed label (FN) or spurious label (FP) contributes a penalty
(0 dB by default), and the clip score is the mean over the union of true
and predicted labels. Corpus ranking is the mean of per-clip scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .signal import SDR_EPSILON, MonoClip, sdr
from .vocab import TARGET_CLASS_SET

CATEGORY_TP = "TP"
CATEGORY_FN = "FN"
CATEGORY_FP = "FP"


@dataclass(frozen=True)
class MetricConfig:
    """Penalty values (dB) for label errors plus the SDR epsilon floor."""

    fn_penalty: float = 0.0
    fp_penalty: float = 0.0
    epsilon: float = SDR_EPSILON

    def __post_init__(self):
        if not (math.isfinite(self.fn_penalty) and math.isfinite(self.fp_penalty)):
            raise ValueError("penalties must be finite")


@dataclass(frozen=True)
class ClipReference:
    """Ground truth for one clip: the reference-channel mixture plus the
    direct-path target waveform for every true label."""

    mixture: MonoClip
    targets: dict[str, MonoClip]

    def __post_init__(self):
        for label, clip in self.targets.items():
            if len(clip) != len(self.mixture) or clip.sample_rate != self.mixture.sample_rate:
                raise ValueError(
                    f"target '{label}' does not match the mixture "
                    f"({len(clip)} samples @ {clip.sample_rate} Hz vs "
                    f"{len(self.mixture)} @ {self.mixture.sample_rate} Hz)"
                )


@dataclass(frozen=True)
class ClipEstimate:
    """A system's output for one clip: one waveform per predicted label."""

    estimates: dict[str, MonoClip]


@dataclass(frozen=True)
class LabelScore:
    category: str  # TP, FN or FP
    value: float   # dB contribution to the clip score


@dataclass(frozen=True)
class ClipScore:
    """Per-clip outcome: one entry per label in the true/predicted union."""

    per_label: dict[str, LabelScore]
    ca_sdri: float
    tp: int
    fn: int
    fp: int


def sdri(estimate: MonoClip, reference: MonoClip, mixture: MonoClip,
         epsilon: float = SDR_EPSILON) -> float:
    """SDR improvement of the estimate over leaving the mixture untouched."""
    return sdr(estimate, reference, epsilon) - sdr(mixture, reference, epsilon)


def score_clip(
    reference: ClipReference,
    estimate: ClipEstimate,
    config: MetricConfig = MetricConfig(),
    vocabulary: frozenset[str] = TARGET_CLASS_SET,
) -> ClipScore:
    """Score one clip against its reference.

    Labels present on both sides contribute their SDRi; labels only in the
    reference contribute the FN penalty, labels only in the estimate the FP
    penalty. The clip score is the mean over the label union, accumulated
    in sorted label order so results are bit-reproducible.
    """
    true_labels = set(reference.targets)
    predicted = set(estimate.estimates)
    unknown = sorted((true_labels | predicted) - vocabulary)
    if unknown:
        raise ValueError(f"labels not in the configured vocabulary: {unknown}")
    union = sorted(true_labels | predicted)
    if not union:
        raise ValueError("nothing to score: no true or predicted labels")

    per_label: dict[str, LabelScore] = {}
    total = 0.0
    tp = fn = fp = 0
    for label in union:
        if label in true_labels and label in predicted:
            est_clip = estimate.estimates[label]
            if len(est_clip) != len(reference.mixture):
                raise ValueError(
                    f"estimate '{label}' is {len(est_clip)} samples, "
                    f"reference clips are {len(reference.mixture)}"
                )
            value = sdri(est_clip, reference.targets[label], reference.mixture, config.epsilon)
            category = CATEGORY_TP
            tp += 1
        elif label in true_labels:
            value, category = config.fn_penalty, CATEGORY_FN
            fn += 1
        else:
            value, category = config.fp_penalty, CATEGORY_FP
            fp += 1
        per_label[label] = LabelScore(category, value)
        total += value
    return ClipScore(per_label=per_label, ca_sdri=total / len(union), tp=tp, fn=fn, fp=fp)


def ranking_score(clip_scores: list[ClipScore]) -> float:
    """Corpus ranking score: arithmetic mean of the per-clip scores."""
    if not clip_scores:
        raise ValueError("ranking score needs at least one clip score")
    return sum(score.ca_sdri for score in clip_scores) / len(clip_scores)


@dataclass(frozen=True)
class ClassTally:
    tp: int
    fn: int
    fp: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class DetectionReport:
    """Label-detection tallies aggregated over a set of scored clips."""

    per_class: dict[str, ClassTally]
    tp: int
    fn: int
    fp: int
    precision: float       # micro, over all labels
    recall: float
    f1: float
    macro_f1: float        # mean of per-class F1
    exact_match_accuracy: float  # fraction of clips with no FN and no FP
    clips: int


def _prf(tp: int, fn: int, fp: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def detection_report(clip_scores: list[ClipScore]) -> DetectionReport:
    """Standard detection tallies from per-label categories."""
    if not clip_scores:
        raise ValueError("detection report needs at least one clip score")
    counts: dict[str, list[int]] = {}
    exact = 0
    for score in clip_scores:
        if score.fn == 0 and score.fp == 0:
            exact += 1
        for label, entry in score.per_label.items():
            row = counts.setdefault(label, [0, 0, 0])
            row[(CATEGORY_TP, CATEGORY_FN, CATEGORY_FP).index(entry.category)] += 1

    per_class = {}
    for label in sorted(counts):
        tp, fn, fp = counts[label]
        precision, recall, f1 = _prf(tp, fn, fp)
        per_class[label] = ClassTally(tp, fn, fp, precision, recall, f1)
    total_tp = sum(t.tp for t in per_class.values())
    total_fn = sum(t.fn for t in per_class.values())
    total_fp = sum(t.fp for t in per_class.values())
    precision, recall, f1 = _prf(total_tp, total_fn, total_fp)
    macro_f1 = sum(t.f1 for t in per_class.values()) / len(per_class)
    return DetectionReport(
        per_class=per_class,
        tp=total_tp,
        fn=total_fn,
        fp=total_fp,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=macro_f1,
        exact_match_accuracy=exact / len(clip_scores),
        clips=len(clip_scores),
    )
