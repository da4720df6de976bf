import numpy as np
import pytest

from pointseg.core import IGNORE, ClassCatalog, LabelMap
from pointseg.losses import ImageLevelLabels, PointLabel, WeightedPoints
from pointseg.supervision import (
    SupervisionKind,
    SupervisionRecord,
    WeightScheme,
    WeightSchemeKind,
    assign_weights,
    compose_hybrid,
    derive_image_labels,
    dilate_points,
    record_to_json,
)


def pts(width, height, entries):
    return WeightedPoints(width, height, tuple(PointLabel(*e) for e in entries))


class TestAssignWeights:
    def test_uniform_two_points(self):
        out = assign_weights(
            pts(4, 4, [(0, 1, 9.0), (5, 2, 9.0)]),
            WeightScheme(WeightSchemeKind.UNIFORM_1_OVER_N),
        )
        assert [p.alpha for p in out.points] == [0.5, 0.5]

    def test_rank_halving(self):
        out = assign_weights(
            pts(4, 4, [(0, 1, 1.0, 0), (1, 1, 1.0, 1), (2, 1, 1.0, 2)]),
            WeightScheme(WeightSchemeKind.RANK_HALVING),
        )
        assert [p.alpha for p in out.points] == [1.0, 0.5, 0.25]

    def test_annotator_confidence(self):
        out = assign_weights(
            pts(4, 4, [(0, 1, 1.0, 0, "a"), (5, 2, 1.0, 0, "b")]),
            WeightScheme(
                WeightSchemeKind.ANNOTATOR_CONFIDENCE, {"a": 1.0, "b": 0.5}
            ),
        )
        assert [p.alpha for p in out.points] == [0.5, 0.25]

    def test_unknown_annotator(self):
        with pytest.raises(KeyError):
            assign_weights(
                pts(4, 4, [(0, 1, 1.0, 0, "mystery")]),
                WeightScheme(WeightSchemeKind.ANNOTATOR_CONFIDENCE, {"a": 1.0}),
            )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            assign_weights(WeightedPoints(4, 4, ()), WeightScheme(WeightSchemeKind.UNIFORM_1_OVER_N))

    def test_preserves_positions_and_rank_sum_bound(self):
        entries = [(i, 1, 1.0, r) for r, i in enumerate((3, 7, 9, 12, 14))]
        src = pts(4, 4, entries)
        out = assign_weights(src, WeightScheme(WeightSchemeKind.RANK_HALVING))
        assert [p.pixel for p in out.points] == [p.pixel for p in src.points]
        assert sum(p.alpha for p in out.points) < 2.0


class TestDilatePoints:
    def test_radius_zero_identity(self):
        src = pts(9, 9, [(40, 1, 0.5)])
        assert dilate_points(src, 0) is src

    def test_center_disc_13_pixels(self):
        # offsets with dx^2 + dy^2 <= 4 enumerate to 13 pixels
        out = dilate_points(pts(9, 9, [(4 * 9 + 4, 1, 1.0)]), 2)
        assert len(out) == 13
        assert sum(p.alpha for p in out.points) == pytest.approx(1.0)
        assert all(p.alpha == pytest.approx(1.0 / 13.0) for p in out.points)

    def test_corner_clipped(self):
        out = dilate_points(pts(9, 9, [(0, 1, 1.0)]), 2)
        # in-bounds quadrant of the 13-pixel disc: (0,0),(1,0),(2,0),(0,1),(1,1),(0,2)
        assert {p.pixel for p in out.points} == {0, 1, 2, 9, 10, 18}
        assert sum(p.alpha for p in out.points) == pytest.approx(1.0)

    def test_cross_class_overlap_dropped_from_both(self):
        # two points of different classes 2 apart; radius 1 discs meet at the midpoint
        src = pts(9, 1, [(2, 1, 1.0), (4, 2, 1.0)])
        out = dilate_points(src, 1)
        pixels_by_class = {}
        for p in out.points:
            pixels_by_class.setdefault(p.class_id, set()).add(p.pixel)
        assert 3 not in pixels_by_class[1] and 3 not in pixels_by_class[2]
        # each surviving disc still carries its point's full weight
        for c in (1, 2):
            total = sum(p.alpha for p in out.points if p.class_id == c)
            assert total == pytest.approx(1.0)

    def test_same_class_overlap_merged(self):
        src = pts(9, 1, [(2, 1, 1.0), (4, 1, 1.0)])
        out = dilate_points(src, 1)
        by_pixel = {p.pixel: p.alpha for p in out.points}
        assert by_pixel[3] == pytest.approx(2.0 / 3.0)  # 1/3 from each disc
        assert sum(by_pixel.values()) == pytest.approx(2.0)

    def test_monotone_in_radius_before_conflicts(self):
        src = pts(15, 15, [(7 * 15 + 7, 1, 1.0)])
        prev = set()
        for radius in (0, 1, 2, 3, 5):
            out = dilate_points(src, radius)
            now = {p.pixel for p in out.points}
            assert prev <= now
            prev = now


class TestDeriveImageLabels:
    def cat(self):
        return ClassCatalog.with_background_zero(6)

    def test_single_class(self):
        mask = LabelMap(np.full((3, 3), 3), num_classes=6)
        labels = derive_image_labels(mask, self.cat())
        assert labels.present == {3}
        assert labels.absent == {1, 2, 4, 5}

    def test_two_classes(self):
        arr = np.full((2, 4), 5, dtype=int)
        arr[0, :2] = 1
        arr[1, 2:] = 4
        labels = derive_image_labels(LabelMap(arr, num_classes=6), self.cat())
        assert labels.present == {1, 4, 5}
        assert labels.absent == {2, 3}

    def test_background_excluded_on_request(self):
        arr = np.zeros((2, 4), dtype=int)
        arr[0, 0] = 1
        labels = derive_image_labels(
            LabelMap(arr, num_classes=6), self.cat(), include_background=False
        )
        assert labels.present == {1}
        assert labels.absent == {2, 3, 4, 5}

    def test_background_never_absent(self):
        arr = np.zeros((2, 4), dtype=int)
        arr[0, 0] = 1
        labels = derive_image_labels(LabelMap(arr, num_classes=6), self.cat())
        assert labels.present == {0, 1}
        assert 0 not in labels.absent

    def test_ignore_only_class_excluded(self):
        arr = np.zeros((2, 4), dtype=int)
        arr[0, 0] = 1
        arr[1, 1] = IGNORE  # class 2's region got marked difficult wholesale
        labels = derive_image_labels(LabelMap(arr, num_classes=6), self.cat())
        assert 2 not in labels.present
        assert 2 in labels.absent

    def test_all_ignore_rejected(self):
        mask = LabelMap(np.full((2, 2), IGNORE), num_classes=6)
        with pytest.raises(ValueError):
            derive_image_labels(mask, self.cat())


class TestComposeHybrid:
    def make_records(self, n):
        cat = ClassCatalog.with_background_zero(3)
        full, point = [], []
        for i in range(n):
            mask = LabelMap(np.full((2, 2), 1), num_classes=3)
            labels = ImageLevelLabels(frozenset({1}), frozenset({2}))
            full.append(
                SupervisionRecord(SupervisionKind.FULL, labels, image_id=f"im{i}", mask=mask)
            )
            point.append(
                SupervisionRecord(
                    SupervisionKind.POINTS_1,
                    labels,
                    image_id=f"im{i}",
                    points=WeightedPoints(2, 2, (PointLabel(0, 1, 1.0),)),
                )
            )
        return full, point

    def test_all_full(self):
        full, point = self.make_records(5)
        out = compose_hybrid(full, point, 5, seed=0)
        assert all(r.kind is SupervisionKind.FULL for r in out)

    def test_all_points(self):
        full, point = self.make_records(5)
        out = compose_hybrid(full, point, 0, seed=0)
        assert all(r.kind is SupervisionKind.POINTS_1 for r in out)

    def test_seeded_reproducible(self):
        full, point = self.make_records(40)
        a = compose_hybrid(full, point, 7, seed=99)
        b = compose_hybrid(full, point, 7, seed=99)
        assert [r.kind for r in a] == [r.kind for r in b]
        assert sum(r.kind is SupervisionKind.FULL for r in a) == 7

    def test_bad_counts(self):
        full, point = self.make_records(3)
        with pytest.raises(ValueError):
            compose_hybrid(full, point, -1, seed=0)
        with pytest.raises(ValueError):
            compose_hybrid(full, point, 4, seed=0)


class TestSupervisionRecord:
    def test_full_requires_mask(self):
        labels = ImageLevelLabels(frozenset({1}), frozenset())
        with pytest.raises(ValueError):
            SupervisionRecord(SupervisionKind.FULL, labels)

    def test_points_require_cover(self):
        labels = ImageLevelLabels(frozenset({1, 2}), frozenset())
        with pytest.raises(ValueError, match="without any point"):
            SupervisionRecord(
                SupervisionKind.POINTS_1,
                labels,
                points=WeightedPoints(2, 2, (PointLabel(0, 1, 1.0),)),
            )

    def test_image_level_payload_free(self):
        labels = ImageLevelLabels(frozenset({1}), frozenset())
        with pytest.raises(ValueError):
            SupervisionRecord(
                SupervisionKind.IMAGE_LEVEL,
                labels,
                points=WeightedPoints(2, 2, (PointLabel(0, 1, 1.0),)),
            )

    def test_record_json_shape(self):
        labels = ImageLevelLabels(frozenset({1}), frozenset({2}))
        rec = SupervisionRecord(
            SupervisionKind.POINTS_1,
            labels,
            image_id="im0",
            points=WeightedPoints(4, 4, (PointLabel(6, 1, 0.5, 0, "a"),)),
        )
        obj = record_to_json(rec)
        assert obj["kind"] == "points_1"
        assert obj["labels"] == {"present": [1], "absent": [2]}
        assert obj["points"]["entries"][0] == {
            "x": 2, "y": 1, "class": 1, "alpha": 0.5, "rank": 0, "annotator": "a",
        }
