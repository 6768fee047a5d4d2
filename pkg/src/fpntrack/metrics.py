"""Benchmark metrics: AO/SR, TPR/TNR/GM with ROC-AUC, long-term P/R/F, J stats.

All functions take a predicted track (entries with frame, detection,
present flag) and a groundtruth sequence aligned by frame index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .pyramid import BoundingBox, Mask, box_iou, mask_iou

__all__ = [
    "GroundtruthFrame",
    "GroundtruthSequence",
    "MetricReport",
    "box_iou",
    "mask_iou",
    "average_overlap",
    "oxuva_rates",
    "geometric_mean",
    "roc_auc",
    "roc_curve",
    "longterm_prf",
    "f_measure",
    "davis_j",
]


@dataclass(frozen=True)
class GroundtruthFrame:
    frame: int
    present: bool
    box: Optional[BoundingBox] = None
    mask: Optional[Mask] = None

    def __post_init__(self):
        if self.present and self.box is None:
            raise InvalidInputError(f"frame {self.frame}: present groundtruth needs a box")


@dataclass
class GroundtruthSequence:
    frames: list[GroundtruthFrame] = field(default_factory=list)

    def __post_init__(self):
        idx = [f.frame for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidInputError("groundtruth frames must be strictly increasing")

    def __iter__(self):
        return iter(self.frames)

    def __len__(self):
        return len(self.frames)


@dataclass
class MetricReport:
    protocol: str
    scalars: dict
    curves: dict = field(default_factory=dict)


def _aligned(track, gt: GroundtruthSequence):
    pred = {e.frame: e for e in track}
    pairs = []
    for g in gt:
        if g.frame not in pred:
            raise InvalidInputError(f"track is missing frame {g.frame}")
        pairs.append((pred[g.frame], g))
    return pairs


def _frame_overlap(entry, g: GroundtruthFrame) -> float:
    if g.box is None:
        return 0.0
    return box_iou(entry.detection.box, g.box)


def average_overlap(track, gt: GroundtruthSequence, sr_threshold: float = 0.5) -> tuple[float, float]:
    """GOT-style (AO, SR): mean overlap and success rate over gt-present frames."""
    overlaps = [
        _frame_overlap(e, g) for e, g in _aligned(track, gt) if g.present
    ]
    if not overlaps:
        raise UndefinedMetricError("no groundtruth-present frames")
    ao = float(np.mean(overlaps))
    sr = float(np.mean([o > sr_threshold for o in overlaps]))
    return ao, sr


def oxuva_rates(
    track, gt: GroundtruthSequence, theta: float, iou_threshold: float = 0.5
) -> tuple[float, float]:
    """(TPR, TNR) at confidence threshold theta.

    A frame is predicted present when confidence >= theta. TPR additionally
    requires localization (overlap above iou_threshold).
    """
    tp = pos = tn = neg = 0
    for e, g in _aligned(track, gt):
        predicted_present = e.detection.confidence >= theta
        if g.present:
            pos += 1
            if predicted_present and _frame_overlap(e, g) > iou_threshold:
                tp += 1
        else:
            neg += 1
            if not predicted_present:
                tn += 1
    if pos == 0:
        raise UndefinedMetricError("TPR undefined: no groundtruth-present frames")
    if neg == 0:
        raise UndefinedMetricError("TNR undefined: no groundtruth-absent frames")
    return tp / pos, tn / neg


def geometric_mean(tpr: float, tnr: float) -> float:
    if not (0 <= tpr <= 1 and 0 <= tnr <= 1):
        raise InvalidInputError("rates must lie in [0, 1]")
    return math.sqrt(tpr * tnr)


def roc_curve(
    track, gt: GroundtruthSequence, iou_threshold: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) points over all distinct confidence thresholds, sorted by FPR."""
    confidences = sorted({e.detection.confidence for e in track})
    thetas = [0.0] + confidences + [np.nextafter(max(confidences, default=0.0) + 1, np.inf)]
    points = []
    for theta in thetas:
        tpr, tnr = oxuva_rates(track, gt, theta, iou_threshold)
        points.append((1.0 - tnr, tpr))
    points.sort()
    fpr, tpr = zip(*points)
    return np.asarray(fpr), np.asarray(tpr)


def roc_auc(track, gt: GroundtruthSequence, iou_threshold: float = 0.5) -> float:
    """Area under TPR-vs-FPR by trapezoidal integration over swept thresholds."""
    fpr, tpr = roc_curve(track, gt, iou_threshold)
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(tpr, fpr))


def f_measure(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def longterm_prf(track, gt: GroundtruthSequence) -> tuple[float, float, float, float]:
    """Long-term (P, R, F, theta) at the confidence threshold maximizing F.

    P(theta) averages overlap over frames predicted present; R(theta)
    averages overlap over gt-present frames, scoring zero where the tracker
    reports absence.
    """
    pairs = _aligned(track, gt)
    n_present = sum(1 for _, g in pairs if g.present)
    if n_present == 0:
        raise UndefinedMetricError("no groundtruth-present frames")
    thetas = sorted({e.detection.confidence for e, _ in pairs})
    best = (0.0, 0.0, -1.0, 0.0)
    for theta in thetas:
        overlaps_pred = [
            _frame_overlap(e, g) for e, g in pairs if e.detection.confidence >= theta
        ]
        if not overlaps_pred:
            continue
        p = float(np.mean(overlaps_pred))
        r = (
            sum(
                _frame_overlap(e, g)
                for e, g in pairs
                if g.present and e.detection.confidence >= theta
            )
            / n_present
        )
        f = f_measure(p, r)
        if f > best[2]:
            best = (p, r, f, theta)
    if best[2] < 0:
        return 0.0, 0.0, 0.0, 0.0
    return best


def davis_j(
    track_masks: Sequence[Mask], gt_masks: Sequence[Mask]
) -> tuple[float, float, float]:
    """DAVIS region statistics: (J-mean, J-recall, J-decay).

    Decay is the mean J over the first temporal quartile minus the mean
    over the last quartile.
    """
    if len(track_masks) != len(gt_masks):
        raise InvalidInputError("predicted and groundtruth mask counts differ")
    if len(track_masks) < 4:
        raise UndefinedMetricError("decay needs at least 4 frames")
    js = np.array([mask_iou(p, g) for p, g in zip(track_masks, gt_masks)])
    quartiles = np.array_split(js, 4)
    j_mean = float(js.mean())
    j_recall = float(np.mean(js > 0.5))
    j_decay = float(quartiles[0].mean() - quartiles[3].mean())
    return j_mean, j_recall, j_decay
