"""Training-record construction from mask-annotated videos.

Keyframes are the frames whose combined (union over target objects) mask
area is largest; negative frames are sampled uniformly from zero-area
frames. Grounding cues pair each object's tight bounding box with the
center of its maximum inscribed circle, rescaled to the 840x840 reference
frame with half-up integer rounding.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import COORD_SCALE, BBox, BinaryMask, PointCue, mask_area, max_inscribed_center
from .responses import AksOption, GroundingCue, Task
from .util import derive_seed, round_half_up

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotatedVideo:
    """Source video: per-object, per-frame masks at native resolution."""

    video_id: str
    width: int
    height: int
    objects: tuple[tuple[BinaryMask, ...], ...]  # objects x frames
    queries: tuple[str, ...]
    source: str = ""

    def __post_init__(self):
        objects = tuple(tuple(track) for track in self.objects)
        if not objects:
            raise ValueError(f"video {self.video_id!r} has no objects")
        frame_count = len(objects[0])
        if frame_count == 0:
            raise ValueError(f"video {self.video_id!r} has no frames")
        for oi, track in enumerate(objects):
            if len(track) != frame_count:
                raise ValueError(
                    f"object {oi} of video {self.video_id!r} has {len(track)} frames, "
                    f"expected {frame_count}"
                )
            for mask in track:
                if mask.width != self.width or mask.height != self.height:
                    raise ValueError(
                        f"mask size {mask.width}x{mask.height} does not match video "
                        f"{self.video_id!r} ({self.width}x{self.height})"
                    )
        object.__setattr__(self, "objects", objects)
        object.__setattr__(self, "queries", tuple(self.queries) or ("",))

    @property
    def frame_count(self) -> int:
        return len(self.objects[0])

    @property
    def is_multi_target(self) -> bool:
        return len(self.objects) > 1

    def combined_areas(self) -> list[int]:
        """Union-over-objects mask area for every frame."""
        areas = []
        for t in range(self.frame_count):
            merged = self.objects[0][t].data.astype(bool)
            for track in self.objects[1:]:
                merged = merged | track[t].data.astype(bool)
            areas.append(int(merged.sum()))
        return areas


@dataclass(frozen=True)
class MixSpec:
    """Target record counts and category ratios for the training mix."""

    aks_count: int = 0
    ktg_count: int = 0
    single_multi_ratio: tuple[int, int] = (3, 1)
    a_b_ratio: tuple[int, int] = (1, 1)
    seed: int = 0

    def __post_init__(self):
        if self.aks_count < 0 or self.ktg_count < 0:
            raise ValueError("record counts must be non-negative")
        for name in ("single_multi_ratio", "a_b_ratio"):
            ratio = tuple(getattr(self, name))
            if len(ratio) != 2 or ratio[0] <= 0 or ratio[1] <= 0:
                raise ValueError(f"{name} must be two positive integers")
            object.__setattr__(self, name, ratio)


@dataclass(frozen=True)
class DatasetRecord:
    task: Task
    video_id: str
    keyframe: int
    query: str
    option: AksOption | None = None
    cues: tuple[GroundingCue, ...] | None = None
    video_description: str = ""  # slot for an externally generated description

    def to_json(self) -> dict:
        out = {
            "task": self.task.value,
            "video_id": self.video_id,
            "keyframe": self.keyframe,
            "query": self.query,
            "video_description": self.video_description,
        }
        if self.task is Task.AKS:
            out["option"] = self.option.value
        else:
            out["cues"] = [c.to_json() for c in self.cues]
        return out


def pick_keyframe(video: AnnotatedVideo) -> int:
    """Frame with the largest combined mask area; ties go to the smaller index."""
    areas = video.combined_areas()
    best = max(areas)
    if best <= 0:
        raise ValueError(f"video {video.video_id!r} has no frame with positive mask area")
    return areas.index(best)


def pick_negative_frame(video: AnnotatedVideo, rng: random.Random) -> int | None:
    """Uniformly sampled zero-area frame, or None when every frame shows the target."""
    zero_frames = [t for t, a in enumerate(video.combined_areas()) if a == 0]
    if not zero_frames:
        logger.info("video %r skipped for option B: no zero-area frame", video.video_id)
        return None
    return rng.choice(zero_frames)


def _scaled_cue(mask: BinaryMask, sx: float, sy: float) -> GroundingCue | None:
    ys, xs = np.nonzero(mask.data)
    # Tight box in pixel-edge coordinates: [min, max+1) covers the pixel run.
    x1 = round_half_up(float(xs.min()) * sx)
    y1 = round_half_up(float(ys.min()) * sy)
    x2 = round_half_up(float(xs.max() + 1) * sx)
    y2 = round_half_up(float(ys.max() + 1) * sy)
    if x1 >= x2 or y1 >= y2:
        return None
    center = max_inscribed_center(mask)
    px = round_half_up((center.x + 0.5) * sx)  # pixel center, then rescale
    py = round_half_up((center.y + 0.5) * sy)
    return GroundingCue(BBox(x1, y1, x2, y2), PointCue(px, py))


def annotate_cues(video: AnnotatedVideo, keyframe: int) -> list[GroundingCue]:
    """One cue per object visible on the keyframe, on the 840x840 scale.

    Objects with no pixels on the keyframe (or that collapse to a degenerate
    box after rescaling) are omitted with a logged reason.
    """
    if not 0 <= keyframe < video.frame_count:
        raise ValueError(f"keyframe {keyframe} outside [0, {video.frame_count})")
    sx = COORD_SCALE / video.width
    sy = COORD_SCALE / video.height
    cues = []
    for oi, track in enumerate(video.objects):
        mask = track[keyframe]
        if mask_area(mask) == 0:
            logger.info(
                "object %d of video %r has no pixels on keyframe %d; omitted",
                oi, video.video_id, keyframe,
            )
            continue
        cue = _scaled_cue(mask, sx, sy)
        if cue is None:
            logger.info(
                "object %d of video %r collapses to a degenerate box at the "
                "reference scale; omitted", oi, video.video_id,
            )
            continue
        cues.append(cue)
    return cues


def _split_count(total: int, ratio: tuple[int, int]) -> tuple[int, int]:
    first = round_half_up(total * ratio[0] / (ratio[0] + ratio[1]))
    return first, total - first


def _take(candidates: list, want: int, rng: random.Random, label: str) -> list:
    if want > len(candidates):
        logger.warning("requested %d %s records but only %d candidates exist",
                       want, label, len(candidates))
        want = len(candidates)
    picked = list(candidates)
    rng.shuffle(picked)
    return picked[:want]


def build_mix(videos: Sequence[AnnotatedVideo], spec: MixSpec) -> list[DatasetRecord]:
    """Assemble AKS and KTG records honoring the category ratios.

    Single/multi-target KTG counts follow ``single_multi_ratio`` and AKS
    option counts follow ``a_b_ratio``, each within one record of the exact
    split. Output is a pure function of (videos, spec): all sampling is
    derived from ``spec.seed``.
    """
    if not videos:
        raise ValueError("build_mix requires a non-empty corpus")

    ktg_single: list[DatasetRecord] = []
    ktg_multi: list[DatasetRecord] = []
    aks_a: list[DatasetRecord] = []
    aks_b: list[DatasetRecord] = []

    for video in videos:
        try:
            keyframe = pick_keyframe(video)
        except ValueError:
            logger.info("video %r skipped: no positive-area frame", video.video_id)
            continue
        query = video.queries[0]

        cues = annotate_cues(video, keyframe)
        if cues:
            record = DatasetRecord(Task.KTG, video.video_id, keyframe, query, cues=tuple(cues))
            (ktg_multi if video.is_multi_target else ktg_single).append(record)

        aks_a.append(DatasetRecord(Task.AKS, video.video_id, keyframe, query, option=AksOption.A))
        neg_rng = random.Random(derive_seed(spec.seed, "negative", video.video_id))
        negative = pick_negative_frame(video, neg_rng)
        if negative is not None:
            aks_b.append(DatasetRecord(Task.AKS, video.video_id, negative, query, option=AksOption.B))

    n_single, n_multi = _split_count(spec.ktg_count, spec.single_multi_ratio)
    n_a, n_b = _split_count(spec.aks_count, spec.a_b_ratio)

    records = (
        _take(aks_a, n_a, random.Random(derive_seed(spec.seed, "aks-a")), "AKS option-A")
        + _take(aks_b, n_b, random.Random(derive_seed(spec.seed, "aks-b")), "AKS option-B")
        + _take(ktg_single, n_single, random.Random(derive_seed(spec.seed, "ktg-single")), "KTG single")
        + _take(ktg_multi, n_multi, random.Random(derive_seed(spec.seed, "ktg-multi")), "KTG multi")
    )
    random.Random(derive_seed(spec.seed, "mix-order")).shuffle(records)
    return records
