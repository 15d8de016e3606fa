"""Region similarity (J), boundary accuracy (F), and their mean over mask
sequences.

J is the per-frame mask IoU. F extracts 4-connected boundary pixels (the
image border counts as outside) and scores precision/recall of boundary
pixels within a Euclidean distance tolerance, combined as 2PR/(P+R).
Frames where both masks are empty score 1.0 on both metrics so that
absent-target frames are not penalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .geometry import BinaryMask, MaskSequence

# Fraction of the image diagonal used for the default boundary tolerance.
BOUNDARY_FRACTION = 0.008


def default_tolerance(width: int, height: int) -> float:
    """ceil(0.008 x image diagonal), the usual benchmark convention."""
    return float(math.ceil(BOUNDARY_FRACTION * math.hypot(width, height)))


def _check_dims(pred: BinaryMask, gt: BinaryMask):
    if pred.width != gt.width or pred.height != gt.height:
        raise ValueError(
            f"mask size mismatch: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )


def j_frame(pred: BinaryMask, gt: BinaryMask) -> float:
    """Region similarity (Jaccard index) of two same-sized masks.

    Both-empty frames score 1.0.
    """
    _check_dims(pred, gt)
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    union = int(np.logical_or(p, g).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(p, g).sum())
    return inter / union


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """Boolean map of mask pixels with at least one 4-neighbor outside the
    mask; the image border counts as outside."""
    m = mask.data.astype(bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior


def f_frame(pred: BinaryMask, gt: BinaryMask, tolerance: float | None = None) -> float:
    """Boundary F-measure at the given pixel tolerance.

    Precision is the fraction of predicted boundary pixels within
    ``tolerance`` (exact Euclidean distance) of some ground-truth boundary
    pixel; recall is symmetric. Returns 1.0 when both boundaries are empty
    and 0.0 when exactly one is.
    """
    _check_dims(pred, gt)
    if tolerance is None:
        tolerance = default_tolerance(pred.width, pred.height)
    pb = boundary_pixels(pred)
    gb = boundary_pixels(gt)
    n_pred = int(pb.sum())
    n_gt = int(gb.sum())
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~gb)
    dist_to_pred = ndimage.distance_transform_edt(~pb)
    precision = float((dist_to_gt[pb] <= tolerance).mean())
    recall = float((dist_to_pred[gb] <= tolerance).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricReport:
    j_mean: float
    f_mean: float
    jf_mean: float
    per_frame_j: tuple[float, ...] | None = None
    per_frame_f: tuple[float, ...] | None = None

    def to_json(self, include_frames: bool = False) -> dict:
        out = {"j_mean": self.j_mean, "f_mean": self.f_mean, "jf_mean": self.jf_mean}
        if include_frames and self.per_frame_j is not None:
            out["per_frame_j"] = list(self.per_frame_j)
            out["per_frame_f"] = list(self.per_frame_f)
        return out


def evaluate_sequence(
    pred: MaskSequence, gt: MaskSequence, tolerance: float | None = None
) -> MetricReport:
    """Per-frame J and F averaged over frames; J&F is the mean of the means."""
    if len(pred) != len(gt):
        raise ValueError(f"sequence length mismatch: {len(pred)} vs {len(gt)}")
    js = []
    fs = []
    for p, g in zip(pred.frames, gt.frames):
        js.append(j_frame(p, g))
        fs.append(f_frame(p, g, tolerance))
    j_mean = sum(js) / len(js)
    f_mean = sum(fs) / len(fs)
    return MetricReport(j_mean, f_mean, (j_mean + f_mean) / 2.0, tuple(js), tuple(fs))


def evaluate_dataset(
    pairs: Iterable[tuple[str, MaskSequence, MaskSequence]],
    tolerance: float | None = None,
) -> tuple[MetricReport, dict[str, MetricReport]]:
    """Per-video reports plus the unweighted mean over videos."""
    per_video: dict[str, MetricReport] = {}
    for video_id, pred, gt in pairs:
        if video_id in per_video:
            raise ValueError(f"duplicate video id {video_id!r}")
        per_video[video_id] = evaluate_sequence(pred, gt, tolerance)
    if not per_video:
        raise ValueError("evaluate_dataset requires at least one video")
    n = len(per_video)
    # sum in sorted-id order so the aggregate is exactly input-order invariant
    ordered = [per_video[v] for v in sorted(per_video)]
    j_mean = sum(r.j_mean for r in ordered) / n
    f_mean = sum(r.f_mean for r in ordered) / n
    return MetricReport(j_mean, f_mean, (j_mean + f_mean) / 2.0), per_video
