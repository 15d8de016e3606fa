import random

import numpy as np
import pytest

from vrskit.geometry import (
    BBox,
    BinaryMask,
    MaskSequence,
    PointCue,
    RleMask,
    box_iou,
    box_l1,
    mask_area,
    mask_union,
    max_inscribed_center,
    point_in_box,
    point_l1,
    rle_decode,
    rle_encode,
)


def random_box(rng, lo=0.0, hi=840.0):
    x1, x2 = sorted(rng.uniform(lo, hi) for _ in range(2))
    y1, y2 = sorted(rng.uniform(lo, hi) for _ in range(2))
    return BBox(x1, y1, x2, y2)


def random_mask(rng, width, height, p=0.4):
    data = (np.asarray([rng.random() < p for _ in range(width * height)])
            .reshape(height, width).astype(np.uint8))
    return BinaryMask(data)


def brute_force_center(mask):
    """O(n^2) oracle: per foreground pixel, the exact squared distance to the
    nearest background pixel (with virtual background outside the image)."""
    h, w = mask.data.shape
    padded = np.pad(mask.data, 1)
    bg = [(r, c) for r in range(h + 2) for c in range(w + 2) if padded[r, c] == 0]
    best = None
    for r in range(h):
        for c in range(w):
            if mask.data[r, c] == 0:
                continue
            d2 = min((r + 1 - br) ** 2 + (c + 1 - bc) ** 2 for br, bc in bg)
            if best is None or d2 > best[0]:
                best = (d2, r, c)
    return best  # (squared distance, row, col)


class TestBoxOps:
    def test_iou_identical(self):
        assert box_iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0

    def test_iou_disjoint(self):
        assert box_iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0

    def test_iou_partial_overlap(self):
        # inter = 5*10 = 50, union = 100 + 100 - 50 = 150
        assert box_iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-9)

    def test_iou_degenerate_boxes(self):
        point_box = BBox(5, 5, 5, 5)
        assert box_iou(point_box, point_box) == 0.0  # union 0 guard
        assert box_iou(point_box, BBox(0, 0, 10, 10)) == 0.0

    def test_iou_symmetric_and_bounded(self):
        rng = random.Random(11)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            assert box_iou(a, b) == box_iou(b, a)
            assert 0.0 <= box_iou(a, b) <= 1.0
            assert box_iou(a, a) == 1.0

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            BBox(10, 0, 0, 10)
        with pytest.raises(ValueError):
            BBox(0, 0, 10, float("nan"))

    def test_box_l1_examples(self):
        assert box_l1(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 0.0
        assert box_l1(BBox(0, 0, 10, 10), BBox(4, 0, 10, 10)) == 1.0   # (4+0+0+0)/4
        assert box_l1(BBox(0, 0, 10, 10), BBox(8, 8, 18, 18)) == 8.0   # 32/4

    def test_point_l1_examples(self):
        assert point_l1(PointCue(5, 5), PointCue(5, 5)) == 0.0
        assert point_l1(PointCue(0, 0), PointCue(30, 30)) == 30.0
        assert point_l1(PointCue(10, 0), PointCue(0, 10)) == 10.0

    def test_l1_metric_properties(self):
        rng = random.Random(7)
        for _ in range(100):
            a, b, c = (random_box(rng) for _ in range(3))
            assert box_l1(a, b) == box_l1(b, a)
            assert box_l1(a, b) >= 0.0
            assert box_l1(a, c) <= box_l1(a, b) + box_l1(b, c) + 1e-12
            p, q, r = (PointCue(rng.uniform(0, 840), rng.uniform(0, 840)) for _ in range(3))
            assert point_l1(p, q) == point_l1(q, p)
            assert point_l1(p, r) <= point_l1(p, q) + point_l1(q, r) + 1e-12

    def test_point_in_box(self):
        box = BBox(0, 0, 10, 10)
        assert point_in_box(PointCue(5, 5), box)
        assert not point_in_box(PointCue(11, 5), box)
        assert point_in_box(PointCue(10, 10), box)  # closed boundary


class TestMaskOps:
    def test_mask_area(self):
        assert mask_area(BinaryMask.zeros(4, 4)) == 0
        assert mask_area(BinaryMask.full(4, 4)) == 16
        top_row = np.zeros((4, 4), dtype=np.uint8)
        top_row[0, :] = 1
        assert mask_area(BinaryMask(top_row)) == 4

    def test_union_identity_and_counts(self):
        rng = random.Random(3)
        a = random_mask(rng, 6, 5)
        assert mask_union([a]) == a

        left = np.zeros((4, 4), dtype=np.uint8)
        left[0, :3] = 1
        right = np.zeros((4, 4), dtype=np.uint8)
        right[2, :] = 1
        right[3, 0] = 1
        union = mask_union([BinaryMask(left), BinaryMask(right)])
        assert mask_area(union) == 8  # disjoint: 3 + 5

        overlap_a = np.zeros((4, 4), dtype=np.uint8)
        overlap_a[0, :4] = 1
        overlap_b = np.zeros((4, 4), dtype=np.uint8)
        overlap_b[0, 2:] = 1
        overlap_b[1, :2] = 1
        assert mask_area(mask_union([BinaryMask(overlap_a), BinaryMask(overlap_b)])) == 6

    def test_union_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mask_union([BinaryMask.zeros(4, 4), BinaryMask.zeros(5, 4)])
        with pytest.raises(ValueError):
            mask_union([])

    def test_union_algebra(self):
        rng = random.Random(5)
        for _ in range(50):
            a, b, c = (random_mask(rng, 7, 6) for _ in range(3))
            assert mask_union([a, a]) == a
            assert mask_union([a, b]) == mask_union([b, a])
            assert mask_union([mask_union([a, b]), c]) == mask_union([a, mask_union([b, c])])
            assert mask_area(mask_union([a, b])) <= mask_area(a) + mask_area(b)

    def test_inscribed_center_single_pixel(self):
        assert max_inscribed_center(BinaryMask.full(1, 1)) == PointCue(0, 0)

    def test_inscribed_center_square(self):
        d2, r, c = brute_force_center(BinaryMask.full(5, 5))
        assert (r, c) == (2, 2)
        assert max_inscribed_center(BinaryMask.full(5, 5)) == PointCue(2, 2)

    def test_inscribed_center_tie_break(self):
        # 4x4 all-ones: four interior pixels tie; smallest row then column wins
        assert max_inscribed_center(BinaryMask.full(4, 4)) == PointCue(1, 1)

    def test_inscribed_center_l_shape_matches_oracle(self):
        data = np.zeros((8, 8), dtype=np.uint8)
        data[:8, :3] = 1
        data[5:, :8] = 1
        mask = BinaryMask(data)
        d2, r, c = brute_force_center(mask)
        assert max_inscribed_center(mask) == PointCue(c, r)

    def test_inscribed_center_random_matches_oracle(self):
        rng = random.Random(17)
        for trial in range(40):
            w = rng.randint(1, 16)
            h = rng.randint(1, 16)
            mask = random_mask(rng, w, h, p=0.6)
            if mask_area(mask) == 0:
                continue
            d2, r, c = brute_force_center(mask)
            got = max_inscribed_center(mask)
            assert mask.data[int(got.y), int(got.x)] == 1
            got_d2 = min(
                (int(got.y) + 1 - br) ** 2 + (int(got.x) + 1 - bc) ** 2
                for br in range(h + 2)
                for bc in range(w + 2)
                if np.pad(mask.data, 1)[br, bc] == 0
            )
            assert got_d2 == d2, f"trial {trial}: distance {got_d2} != oracle {d2}"
            assert (int(got.y), int(got.x)) == (r, c)

    def test_inscribed_center_empty_mask(self):
        with pytest.raises(ValueError):
            max_inscribed_center(BinaryMask.zeros(3, 3))

    def test_inscribed_center_64x64_matches_oracle(self):
        # vectorized brute force keeps the stated 64x64 bound tractable
        def oracle(mask):
            padded = np.pad(mask.data, 1)
            bg = np.argwhere(padded == 0)
            fg = np.argwhere(mask.data == 1) + 1
            best = (-1, None)
            for r, c in fg:
                d2 = int(((bg[:, 0] - r) ** 2 + (bg[:, 1] - c) ** 2).min())
                if d2 > best[0]:
                    best = (d2, (r - 1, c - 1))
            return best

        rng = random.Random(29)
        cases = [BinaryMask.full(64, 64)]
        ring = np.ones((64, 64), dtype=np.uint8)
        ring[20:44, 20:44] = 0
        cases.append(BinaryMask(ring))
        blob = np.zeros((64, 64), dtype=np.uint8)
        for _ in range(6):
            w, h = rng.randint(4, 30), rng.randint(4, 30)
            x0, y0 = rng.randint(0, 64 - w), rng.randint(0, 64 - h)
            blob[y0 : y0 + h, x0 : x0 + w] = 1
        cases.append(BinaryMask(blob))
        for mask in cases:
            d2, (r, c) = oracle(mask)
            got = max_inscribed_center(mask)
            bg = np.argwhere(np.pad(mask.data, 1) == 0)
            got_d2 = int(((bg[:, 0] - (got.y + 1)) ** 2 + (bg[:, 1] - (got.x + 1)) ** 2).min())
            assert got_d2 == d2
            assert (int(got.y), int(got.x)) == (r, c)


class TestRle:
    def test_all_zero(self):
        assert rle_encode(BinaryMask.zeros(2, 2)).counts == (4,)

    def test_all_one(self):
        assert rle_encode(BinaryMask.full(2, 2)).counts == (0, 4)

    def test_column_major_order(self):
        data = np.zeros((2, 2), dtype=np.uint8)
        data[0, 1] = 1  # column-major flat: [0, 0, 1, 0]
        assert rle_encode(BinaryMask(data)).counts == (2, 1, 1)

    def test_round_trip_random(self):
        rng = random.Random(23)
        for _ in range(100):
            mask = random_mask(rng, rng.randint(1, 12), rng.randint(1, 12))
            assert rle_decode(rle_encode(mask)) == mask

    def test_decode_errors(self):
        with pytest.raises(ValueError):
            rle_decode(RleMask(2, 2, (3,)))  # sums to 3, needs 4
        with pytest.raises(ValueError):
            RleMask(2, 2, (-1, 5))

    def test_json_round_trip(self):
        rle = RleMask(3, 2, (1, 2, 3))
        obj = rle.to_json()
        assert obj == {"size": [2, 3], "counts": [1, 2, 3]}
        assert RleMask.from_json(obj) == rle


class TestMaskSequence:
    def test_uniform_dims_required(self):
        with pytest.raises(ValueError):
            MaskSequence((BinaryMask.zeros(3, 3), BinaryMask.zeros(4, 3)))
        with pytest.raises(ValueError):
            MaskSequence(())

    def test_equality(self):
        a = MaskSequence((BinaryMask.zeros(3, 3), BinaryMask.full(3, 3)))
        b = MaskSequence((BinaryMask.zeros(3, 3), BinaryMask.full(3, 3)))
        assert a == b and len(a) == 2
