import math

import numpy as np
import pytest

from pointseg.core import IGNORE, ClassCatalog, LabelMap, ScoreMap, softmax
from pointseg.losses import (
    ImageLevelLabels,
    PointLabel,
    WeightedPoints,
    combined_loss,
    loss_img,
    loss_obj,
    loss_pix,
    loss_point,
)
from pointseg.objectness import ObjectnessMap
from pointseg.supervision import SupervisionKind, SupervisionRecord

from conftest import central_difference, max_rel_error, random_scores


def scores_for_probs(probs: np.ndarray) -> ScoreMap:
    """Scores whose softmax is (up to clamping) the given probabilities."""
    return ScoreMap(np.log(np.maximum(probs, 1e-300)))


def fd_check(loss_fn, scores: ScoreMap, tol: float = 1e-4, h: float = 1e-3) -> None:
    lv = loss_fn(scores)
    fd = central_difference(lambda s: loss_fn(ScoreMap(s)).value, scores.scores.copy(), h=h)
    assert max_rel_error(lv.grad, fd) <= tol


class TestLossPix:
    def test_perfect_prediction_zero(self):
        probs = np.zeros((2, 2, 3))
        probs[..., 1] = 1.0
        gt = LabelMap(np.full((2, 2), 1), num_classes=3)
        lv = loss_pix(scores_for_probs(probs), gt)
        assert lv.value == pytest.approx(0.0, abs=1e-9)

    def test_uniform_softmax_value(self):
        scores = ScoreMap(np.zeros((2, 2, 21)))
        gt = LabelMap(np.zeros((2, 2), dtype=int), num_classes=21)
        lv = loss_pix(scores, gt)
        assert lv.value == pytest.approx(4.0 * math.log(21.0), rel=1e-12)

    def test_all_ignore_zero(self, rng):
        scores = random_scores(rng, 3, 3, 4)
        gt = LabelMap(np.full((3, 3), IGNORE), num_classes=4)
        lv = loss_pix(scores, gt)
        assert lv.value == 0.0
        assert not lv.grad.any()

    def test_gradient_two_pixel(self, rng):
        scores = random_scores(rng, 1, 2, 3)
        gt = LabelMap(np.array([[0, 2]]), num_classes=3)
        fd_check(lambda s: loss_pix(s, gt), scores)

    def test_gradient_with_ignore(self, rng):
        scores = random_scores(rng, 3, 4, 5)
        labels = rng.integers(0, 5, size=(3, 4))
        labels[1, 1] = IGNORE
        gt = LabelMap(labels, num_classes=5)
        fd_check(lambda s: loss_pix(s, gt), scores)
        lv = loss_pix(scores, gt)
        assert not lv.grad[1, 1].any()

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            loss_pix(random_scores(rng, 2, 2, 3), LabelMap(np.zeros((3, 2), dtype=int)))

    def test_label_out_of_range(self, rng):
        with pytest.raises(ValueError):
            loss_pix(random_scores(rng, 1, 1, 3), LabelMap(np.array([[7]])))


class TestLossImg:
    def test_saturated_zero(self):
        # class 0 certain at pixel 0, class 1 never predicted
        probs = np.array([[[1.0, 0.0], [1.0, 0.0]]])
        lv = loss_img(scores_for_probs(probs), ImageLevelLabels(frozenset({0}), frozenset({1})))
        assert lv.value == pytest.approx(0.0, abs=1e-9)

    def test_uniform_two_class_value(self):
        scores = ScoreMap(np.zeros((1, 1, 2)))
        lv = loss_img(scores, ImageLevelLabels(frozenset({0}), frozenset({1})))
        assert lv.value == pytest.approx(2.0 * math.log(2.0), rel=1e-12)

    def test_empty_absent_term_zero(self):
        scores = ScoreMap(np.zeros((1, 1, 2)))
        lv = loss_img(scores, ImageLevelLabels(frozenset({0}), frozenset()))
        assert lv.value == pytest.approx(math.log(2.0), rel=1e-12)

    def test_empty_present_rejected(self):
        with pytest.raises(ValueError):
            ImageLevelLabels(frozenset(), frozenset({1}))

    def test_gradient_random_maps_stable_argmax(self, rng):
        labels = ImageLevelLabels(frozenset({0, 2}), frozenset({1}))
        checked = 0
        while checked < 10:
            scores = random_scores(rng, 4, 4, 3)
            probs = softmax(scores).flat()
            # skip instances whose per-class argmax could flip under h
            margins = np.sort(probs, axis=0)
            if (margins[-1] - margins[-2] < 0.02).any():
                continue
            fd_check(lambda s: loss_img(s, labels), scores)
            checked += 1


class TestLossPoint:
    def test_empty_points_equals_loss_img(self, rng):
        scores = random_scores(rng, 3, 3, 4)
        labels = ImageLevelLabels(frozenset({1}), frozenset({2}))
        pts = WeightedPoints(3, 3, ())
        a = loss_point(scores, pts, labels)
        b = loss_img(scores, labels)
        assert a.value == b.value
        assert np.array_equal(a.grad, b.grad)

    def test_saturated_zero(self):
        probs = np.zeros((1, 2, 2))
        probs[0, :, 0] = 1.0
        scores = scores_for_probs(probs)
        labels = ImageLevelLabels(frozenset({0}), frozenset())
        pts = WeightedPoints(2, 1, (PointLabel(0, 0, 1.0), PointLabel(1, 0, 0.5)))
        lv = loss_point(scores, pts, labels)
        assert lv.value == pytest.approx(0.0, abs=1e-9)

    def test_frozen_two_point_value(self):
        # independent scalar recomputation of the image and point terms
        rng = np.random.default_rng(7)
        scores = random_scores(rng, 3, 3, 3)
        probs = softmax(scores).flat()
        labels = ImageLevelLabels(frozenset({0, 1}), frozenset({2}))
        pts = WeightedPoints(3, 3, (PointLabel(4, 0, 1.0), PointLabel(7, 1, 0.5)))

        expected = 0.0
        for c in (0, 1):
            expected -= 0.5 * math.log(probs[:, c].max())
        t2 = int(np.argmax(probs[:, 2]))
        expected -= math.log(1.0 - probs[t2, 2])
        expected -= 1.0 * math.log(probs[4, 0]) + 0.5 * math.log(probs[7, 1])

        lv = loss_point(scores, pts, labels)
        assert lv.value == pytest.approx(expected, rel=1e-12)
        fd = central_difference(
            lambda s: loss_point(ScoreMap(s), pts, labels).value, scores.scores.copy()
        )
        assert max_rel_error(lv.grad, fd) <= 1e-4

    def test_point_on_absent_class_rejected(self, rng):
        scores = random_scores(rng, 2, 2, 3)
        labels = ImageLevelLabels(frozenset({0}), frozenset({1}))
        pts = WeightedPoints(2, 2, (PointLabel(0, 1, 1.0),))
        with pytest.raises(ValueError, match="absent"):
            loss_point(scores, pts, labels)

    def test_all_pixels_unit_alpha_matches_loss_pix(self, rng):
        # the point term with every pixel supervised at weight 1 is the
        # per-pixel loss; the image term is subtracted off to compare
        scores = random_scores(rng, 2, 3, 3)
        labels_arr = rng.integers(0, 3, size=(2, 3))
        gt = LabelMap(labels_arr, num_classes=3)
        present = frozenset(int(c) for c in np.unique(labels_arr))
        labels = ImageLevelLabels(present, frozenset())
        pts = WeightedPoints(
            3, 2, tuple(PointLabel(i, int(labels_arr.reshape(-1)[i]), 1.0) for i in range(6))
        )
        lv_point = loss_point(scores, pts, labels)
        lv_img = loss_img(scores, labels)
        lv_pix = loss_pix(scores, gt)
        assert lv_point.value - lv_img.value == pytest.approx(lv_pix.value, rel=1e-12)
        assert np.allclose(lv_point.grad - lv_img.grad, lv_pix.grad, atol=1e-12)


class TestLossObj:
    def test_perfect_object_mass_zero(self):
        probs = np.zeros((2, 2, 3))
        probs[..., 1] = 1.0  # all mass on an object class
        prior = ObjectnessMap(np.ones((2, 2)))
        cat = ClassCatalog.with_background_zero(3)
        lv = loss_obj(scores_for_probs(probs), prior, cat)
        assert lv.value == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_half_value(self):
        # q = 0.5 everywhere (one object, one background class, uniform)
        scores = ScoreMap(np.zeros((2, 3, 2)))
        prior = ObjectnessMap(np.full((2, 3), 0.5))
        cat = ClassCatalog.with_background_zero(2)
        lv = loss_obj(scores, prior, cat)
        assert lv.value == pytest.approx(math.log(2.0), rel=1e-12)

    def test_gradient_random(self, rng):
        cat = ClassCatalog.with_background_zero(21)
        prior = ObjectnessMap(rng.uniform(0.0, 1.0, size=(4, 4)))
        scores = random_scores(rng, 4, 4, 21)
        fd_check(lambda s: loss_obj(s, prior, cat), scores)

    def test_prior_shape_mismatch(self, rng):
        cat = ClassCatalog.with_background_zero(3)
        with pytest.raises(ValueError):
            loss_obj(random_scores(rng, 2, 2, 3), ObjectnessMap(np.zeros((3, 3))), cat)

    def test_prior_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ObjectnessMap(np.array([[1.5]]))


class TestCombinedLoss:
    def cat(self):
        return ClassCatalog.with_background_zero(4)

    def test_lambda_zero_matches_base(self, rng):
        scores = random_scores(rng, 3, 3, 4)
        labels = ImageLevelLabels(frozenset({1}), frozenset({2, 3}))
        rec = SupervisionRecord(kind=SupervisionKind.IMAGE_LEVEL, labels=labels)
        a = combined_loss(scores, rec, None, 0.0, self.cat())
        b = loss_img(scores, labels)
        assert a.value == b.value and np.array_equal(a.grad, b.grad)

    def test_additivity_with_objectness(self, rng):
        scores = random_scores(rng, 3, 3, 4)
        labels = ImageLevelLabels(frozenset({1}), frozenset({2, 3}))
        prior = ObjectnessMap(rng.uniform(0.0, 1.0, size=(3, 3)))
        rec = SupervisionRecord(kind=SupervisionKind.IMAGE_LEVEL, labels=labels)
        combo = combined_loss(scores, rec, prior, 1.0, self.cat())
        parts = loss_img(scores, labels)
        obj = loss_obj(scores, prior, self.cat())
        assert combo.value == pytest.approx(parts.value + obj.value, rel=1e-12)
        assert np.allclose(combo.grad, parts.grad + obj.grad, atol=1e-15)

    def test_component_gradient_sum_exact(self, rng):
        scores = random_scores(rng, 2, 2, 4)
        gt = LabelMap(rng.integers(0, 4, size=(2, 2)), num_classes=4)
        labels = ImageLevelLabels(frozenset({1}), frozenset())
        rec = SupervisionRecord(kind=SupervisionKind.FULL, labels=labels, mask=gt)
        prior = ObjectnessMap(rng.uniform(0.0, 1.0, size=(2, 2)))
        with pytest.warns(UserWarning, match="full supervision"):
            combo = combined_loss(scores, rec, prior, 0.5, self.cat())
        expected = loss_pix(scores, gt) + loss_obj(scores, prior, self.cat()).scaled(0.5)
        assert combo.value == pytest.approx(expected.value, rel=1e-12)
        assert np.allclose(combo.grad, expected.grad, atol=1e-15)

    def test_prior_requirement(self, rng):
        scores = random_scores(rng, 2, 2, 4)
        labels = ImageLevelLabels(frozenset({1}), frozenset())
        rec = SupervisionRecord(kind=SupervisionKind.IMAGE_LEVEL, labels=labels)
        with pytest.raises(ValueError):
            combined_loss(scores, rec, None, 1.0, self.cat())
        prior = ObjectnessMap(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            combined_loss(scores, rec, prior, 0.0, self.cat())

    def test_squiggle_record_dispatch(self, rng):
        scores = random_scores(rng, 3, 3, 4)
        labels = ImageLevelLabels(frozenset({1}), frozenset({3}))
        rec = SupervisionRecord(
            kind=SupervisionKind.SQUIGGLES,
            labels=labels,
            squiggle_pixels=((0, 1), (4, 1)),
            dims=(3, 3),
        )
        combo = combined_loss(scores, rec, None, 0.0, self.cat())
        pts = WeightedPoints(3, 3, (PointLabel(0, 1, 0.5), PointLabel(4, 1, 0.5)))
        expected = loss_point(scores, pts, labels)
        assert combo.value == pytest.approx(expected.value, rel=1e-12)


class TestLossProperties:
    def test_values_non_negative_and_shift_invariant(self, rng):
        cat = ClassCatalog.with_background_zero(5)
        for _ in range(20):
            scores = random_scores(rng, 4, 5, 5)
            shift = rng.normal(0.0, 30.0, size=(4, 5, 1))
            shifted = ScoreMap(scores.scores + shift)

            gt = LabelMap(rng.integers(0, 5, size=(4, 5)), num_classes=5)
            labels = ImageLevelLabels(frozenset({1, 2}), frozenset({3}))
            pts = WeightedPoints(5, 4, (PointLabel(3, 1, 0.7), PointLabel(11, 2, 0.3)))
            prior = ObjectnessMap(rng.uniform(0.0, 1.0, size=(4, 5)))

            for fn in (
                lambda s: loss_pix(s, gt),
                lambda s: loss_img(s, labels),
                lambda s: loss_point(s, pts, labels),
                lambda s: loss_obj(s, prior, cat),
            ):
                a, b = fn(scores), fn(shifted)
                assert a.value >= 0.0
                assert abs(a.value - b.value) <= 1e-8 * max(1.0, abs(a.value))
