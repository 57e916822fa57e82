import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import boxes, coord
from mod2t.core import (AffineTransform, BoundingBox, DegenerateInputError, InvalidInputError, Source,
                        TrackRecord, apply_transform, iou, iou_matrix, mahalanobis_distance, match_boxes)


class TestBoundingBox:
    def test_rejects_non_positive_extent(self):
        with pytest.raises(InvalidInputError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(InvalidInputError):
            BoundingBox(0, 0, 5, -1)

    def test_rejects_confidence_outside_unit_interval(self):
        with pytest.raises(InvalidInputError):
            BoundingBox(0, 0, 5, 5, confidence=1.5)

    def test_center_and_area(self):
        b = BoundingBox(2, 4, 10, 6)
        assert b.center == (7.0, 7.0)
        assert b.area == 60.0
        assert b.to_xyxy() == (2, 4, 12, 10)

    def test_with_center_keeps_extent(self):
        b = BoundingBox(0, 0, 10, 4).with_center(20, 20)
        assert (b.x, b.y, b.w, b.h) == (15, 18, 10, 4)

    def test_degenerate_is_subclass_of_invalid(self):
        assert issubclass(DegenerateInputError, InvalidInputError)


class TestTrackRecord:
    def test_frame_and_id_are_one_based(self):
        b = BoundingBox(0, 0, 1, 1)
        with pytest.raises(InvalidInputError):
            TrackRecord(0, 1, b)
        with pytest.raises(InvalidInputError):
            TrackRecord(1, 0, b)
        assert TrackRecord(1, 1, b).source is Source.DEEP


class TestMahalanobis:
    def test_identical_boxes(self):
        b = BoundingBox(0, 0, 10, 10)
        assert mahalanobis_distance(b, b) == 0.0

    def test_half_width_shift_is_one(self):
        assert mahalanobis_distance(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10)) == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_shift(self):
        d = mahalanobis_distance(BoundingBox(0, 0, 10, 10), BoundingBox(5, 5, 10, 10))
        assert d == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_covariance_comes_from_first_box(self):
        a, b = BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 20, 20)
        # centers (5,5) and (15,10); scaled by box a only
        assert mahalanobis_distance(a, b) == pytest.approx(math.sqrt(4 + 1))

    def test_matches_oracle_on_random_boxes(self, rng):
        from conftest import random_box
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            assert abs(mahalanobis_distance(a, b) - oracles.mahalanobis(a, b)) < 1e-9

    @given(boxes(), boxes(), coord, coord)
    def test_invariant_under_joint_translation(self, a, b, dx, dy):
        shift = lambda q: BoundingBox(q.x + dx, q.y + dy, q.w, q.h)
        assert mahalanobis_distance(shift(a), shift(b)) == pytest.approx(mahalanobis_distance(a, b), rel=1e-9, abs=1e-6)

    @given(boxes())
    def test_self_distance_is_zero(self, a):
        assert mahalanobis_distance(a, a) == 0.0


class TestIoU:
    def test_examples(self):
        a = BoundingBox(0, 0, 10, 10)
        assert iou(a, a) == 1.0
        assert iou(a, BoundingBox(20, 20, 5, 5)) == 0.0
        assert iou(a, BoundingBox(5, 0, 10, 10)) == pytest.approx(1 / 3)

    def test_touching_edges_do_not_overlap(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 10, 10)) == 0.0

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(iou(b, a), abs=1e-12)

    def test_matrix_agrees_with_scalar(self, rng):
        from conftest import random_box
        a = [random_box(rng, 0, 50) for _ in range(6)]
        b = [random_box(rng, 0, 50) for _ in range(4)]
        m = iou_matrix(a, b)
        for i in range(6):
            for j in range(4):
                assert m[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)

    def test_empty_matrix_shape(self):
        assert iou_matrix([], [BoundingBox(0, 0, 1, 1)]).shape == (0, 1)


class TestAffineTransform:
    def test_apply_examples(self):
        assert apply_transform(AffineTransform.identity(), (3, 4)) == (3, 4)
        assert apply_transform(AffineTransform.translation(2, 1), (0, 0)) == (2, 1)
        assert apply_transform(AffineTransform(2, 0, 0, 0, 2, 0), (3, 4)) == (6, 8)

    def test_singular_rejected(self):
        with pytest.raises(InvalidInputError):
            AffineTransform(1, 2, 0, 2, 4, 0)

    @given(st.floats(-3, 3), st.floats(0.2, 3), st.floats(-50, 50), st.floats(-50, 50), coord, coord)
    def test_inverse_round_trip(self, angle, scale, tx, ty, px, py):
        c, s = scale * math.cos(angle), scale * math.sin(angle)
        t = AffineTransform(c, -s, tx, s, c, ty)
        q = apply_transform(t.inverse(), apply_transform(t, (px, py)))
        assert q[0] == pytest.approx(px, abs=1e-9)
        assert q[1] == pytest.approx(py, abs=1e-9)

    def test_compose_applies_argument_first(self):
        first = AffineTransform.translation(1, 0)
        then = AffineTransform(2, 0, 0, 0, 2, 0)
        assert apply_transform(then.compose(first), (1, 1)) == (4, 2)

    def test_from_matrix(self):
        m = np.array([[1.0, 0.0, 3.0], [0.0, 1.0, -2.0]])
        t = AffineTransform.from_matrix(m)
        assert np.array_equal(t.matrix, m)


class TestMatchBoxes:
    def test_prefers_total_overlap(self):
        a = [BoundingBox(0, 0, 10, 10), BoundingBox(6, 0, 10, 10)]
        b = [BoundingBox(5, 0, 10, 10), BoundingBox(0, 0, 10, 10)]
        pairs, ua, ub = match_boxes(a, b, 0.3)
        assert pairs == [(0, 1), (1, 0)]
        assert ua == [] and ub == []

    def test_gate(self):
        a = [BoundingBox(0, 0, 10, 10)]
        b = [BoundingBox(5, 0, 10, 10)]  # IoU 1/3
        assert match_boxes(a, b, 0.5)[0] == []
        assert match_boxes(a, b, 0.3)[0] == [(0, 0)]
        assert match_boxes(a, b, 1 / 3, strict=True)[0] == []

    def test_empty_inputs(self):
        assert match_boxes([], [], 0.3) == ([], [], [])
        assert match_boxes([BoundingBox(0, 0, 1, 1)], [], 0.3) == ([], [0], [])

    def test_one_to_one_against_enumeration(self, rng):
        from mod2t.core import TrackRecord as TR
        from conftest import random_box
        for _ in range(100):
            a = [random_box(rng, 0, 40, 5, 30) for _ in range(rng.integers(0, 4))]
            b = [random_box(rng, 0, 40, 5, 30) for _ in range(rng.integers(0, 4))]
            pairs, _, _ = match_boxes(a, b, 0.3, strict=True)
            expect = oracles.best_assignment([TR(1, 1, x) for x in a], [TR(1, 1, x) for x in b], 0.3)
            assert sorted(pairs) == sorted(expect)
