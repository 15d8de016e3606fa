"""Geometric and binary-mask primitives shared by rewards, metrics, and
dataset construction.

All operations are pure functions over immutable values; boxes and points use
continuous pixel coordinates on a stated reference scale (840x840 by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

# Reference resolution that box/point coordinates are expressed on.
COORD_SCALE = 840.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with corners (x1, y1) top-left and (x2, y2) bottom-right."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        try:
            ok = (math.isfinite(self.x1) and math.isfinite(self.y1)
                  and math.isfinite(self.x2) and math.isfinite(self.y2))
        except TypeError:
            raise ValueError(f"box coordinates must be numbers: {self!r}") from None
        if not ok:
            raise ValueError(f"box coordinates must be finite: {self!r}")
        object.__setattr__(self, "x1", float(self.x1))
        object.__setattr__(self, "y1", float(self.y1))
        object.__setattr__(self, "x2", float(self.x2))
        object.__setattr__(self, "y2", float(self.y2))
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"box corners out of order: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def in_range(self, scale: float = COORD_SCALE) -> bool:
        """True when every coordinate lies within [0, scale]."""
        return all(0.0 <= v <= scale for v in self.as_tuple())


@dataclass(frozen=True)
class PointCue:
    """A 2D point on the same reference scale as :class:`BBox`."""

    x: float
    y: float

    def __post_init__(self):
        try:
            ok = math.isfinite(self.x) and math.isfinite(self.y)
        except TypeError:
            raise ValueError(f"point coordinates must be numbers: {self!r}") from None
        if not ok:
            raise ValueError(f"point coordinates must be finite: {self!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)

    def in_range(self, scale: float = COORD_SCALE) -> bool:
        return 0.0 <= self.x <= scale and 0.0 <= self.y <= scale


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """A 0/1 pixel plane stored as a read-only (height, width) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8 or arr.max(initial=0) > 1:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=np.uint8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class RleMask:
    """Run-length encoding of a mask in column-major pixel order.

    ``counts`` alternates zero-runs and one-runs starting with zeros, so the
    first count may be 0 when the mask begins with a foreground pixel.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("RLE dimensions must be positive")
        if any((not isinstance(c, int)) or c < 0 for c in self.counts):
            raise ValueError("RLE counts must be non-negative integers")

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        try:
            height, width = obj["size"]
            counts = tuple(int(c) for c in obj["counts"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed RLE object: {exc}") from exc
        return cls(int(width), int(height), counts)


@dataclass(frozen=True, eq=False)
class MaskSequence:
    """An ordered, dimensionally uniform sequence of per-frame masks."""

    frames: tuple[BinaryMask, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("mask sequence must contain at least one frame")
        w, h = frames[0].width, frames[0].height
        for i, frame in enumerate(frames):
            if frame.width != w or frame.height != h:
                raise ValueError(
                    f"frame {i} has size {frame.width}x{frame.height}, expected {w}x{h}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskSequence):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self.frames, other.frames))


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes using continuous areas.

    Returns 0.0 when the union is empty (both boxes degenerate).
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def box_l1(a: BBox, b: BBox) -> float:
    """Mean of the four per-coordinate absolute differences, in pixels."""
    return (
        abs(a.x1 - b.x1) + abs(a.y1 - b.y1) + abs(a.x2 - b.x2) + abs(a.y2 - b.y2)
    ) / 4.0


def point_l1(a: PointCue, b: PointCue) -> float:
    """Mean of the two per-coordinate absolute differences, in pixels."""
    return (abs(a.x - b.x) + abs(a.y - b.y)) / 2.0


def point_in_box(p: PointCue, b: BBox) -> bool:
    """Closed-boundary containment test."""
    return b.x1 <= p.x <= b.x2 and b.y1 <= p.y <= b.y2


def mask_area(m: BinaryMask) -> int:
    """Number of foreground pixels."""
    return int(m.data.sum())


def mask_union(masks: Sequence[BinaryMask] | Iterable[BinaryMask]) -> BinaryMask:
    """Pixelwise logical OR of one or more same-sized masks."""
    masks = list(masks)
    if not masks:
        raise ValueError("mask_union requires at least one mask")
    first = masks[0]
    out = first.data.copy()
    for i, m in enumerate(masks[1:], start=1):
        if m.width != first.width or m.height != first.height:
            raise ValueError(
                f"mask {i} has size {m.width}x{m.height}, expected {first.width}x{first.height}"
            )
        np.bitwise_or(out, m.data, out=out)
    return BinaryMask(out)


def max_inscribed_center(m: BinaryMask) -> PointCue:
    """Center of the maximum inscribed circle of a mask.

    Returns the foreground pixel with maximal Euclidean distance to the
    nearest background pixel or image border; ties are broken by smallest
    row, then smallest column.
    """
    if mask_area(m) == 0:
        raise ValueError("max_inscribed_center requires a non-empty mask")
    padded = np.pad(m.data, 1)  # border counts as background
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    # Squared distances are integers; rounding makes argmax ties exact.
    d2 = np.rint(dist * dist).astype(np.int64)
    idx = int(np.argmax(d2))  # row-major scan = smallest row, then column
    y, x = divmod(idx, m.width)
    return PointCue(float(x), float(y))


def rle_encode(m: BinaryMask) -> RleMask:
    """Encode a mask as alternating zero/one run lengths in column-major order."""
    flat = m.data.flatten(order="F")
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0] == 1:
        counts.insert(0, 0)
    return RleMask(m.width, m.height, tuple(int(c) for c in counts))


def rle_decode(r: RleMask) -> BinaryMask:
    """Inverse of :func:`rle_encode`; raises on inconsistent counts."""
    total = sum(r.counts)
    if total != r.width * r.height:
        raise ValueError(
            f"RLE counts sum to {total}, expected {r.width * r.height} for {r.width}x{r.height}"
        )
    values = np.resize(np.array([0, 1], dtype=np.uint8), max(len(r.counts), 1))
    flat = np.repeat(values, np.asarray(r.counts, dtype=np.int64))
    return BinaryMask(flat.reshape((r.height, r.width), order="F"))
