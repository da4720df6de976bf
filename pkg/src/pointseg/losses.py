"""Training losses for full, image-level, point and objectness supervision.

Each loss returns its scalar value together with the exact analytic gradient
with respect to the raw scores, so models can be trained without autodiff.
All losses depend on the scores only through the per-pixel softmax and are
therefore invariant to adding a per-pixel constant to all class scores.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import IGNORE, ClassCatalog, LabelMap, ScoreMap, softmax
from .objectness import ObjectnessMap

# Lower clamp for log arguments; prevents -inf on saturated softmax outputs.
LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossValue:
    """Scalar loss plus its gradient w.r.t. the raw score map (H, W, N)."""

    value: float
    grad: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"loss value must be finite and >= 0, got {self.value}")
        if not np.isfinite(self.grad).all():
            raise ValueError("loss gradient contains non-finite entries")

    def __add__(self, other: "LossValue") -> "LossValue":
        return LossValue(self.value + other.value, self.grad + other.grad)

    def scaled(self, factor: float) -> "LossValue":
        return LossValue(factor * self.value, factor * self.grad)


@dataclass(frozen=True)
class ImageLevelLabels:
    """Classes known to be present (L) and known to be absent (L')."""

    present: frozenset[int]
    absent: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "present", frozenset(self.present))
        object.__setattr__(self, "absent", frozenset(self.absent))
        if not self.present:
            raise ValueError("present class set must be non-empty")
        if self.present & self.absent:
            raise ValueError("present and absent class sets must be disjoint")
        if any(c < 0 for c in self.present | self.absent):
            raise ValueError("class ids must be non-negative")

    def check_bounds(self, num_classes: int) -> None:
        top = max(self.present | self.absent)
        if top >= num_classes:
            raise ValueError(f"class id {top} out of range for {num_classes} classes")


@dataclass(frozen=True)
class PointLabel:
    """One supervised pixel: flat index, class, weight, rank, annotator."""

    pixel: int
    class_id: int
    alpha: float = 1.0
    rank: int = 0
    annotator: str = ""


@dataclass(frozen=True)
class WeightedPoints:
    """Supervised pixels with relative importance weights."""

    width: int
    height: int
    points: tuple[PointLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        n_pix = self.width * self.height
        seen = set()
        for p in self.points:
            if not 0 <= p.pixel < n_pix:
                raise ValueError(f"point pixel {p.pixel} out of bounds for {self.width}x{self.height}")
            if p.alpha <= 0:
                raise ValueError(f"point weight must be positive, got {p.alpha}")
            if p.rank < 0:
                raise ValueError("point rank must be non-negative")
            key = (p.pixel, p.class_id)
            if key in seen:
                raise ValueError(f"duplicate (pixel, class) pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.points)

    def classes(self) -> set[int]:
        return {p.class_id for p in self.points}

    @staticmethod
    def from_xy(width: int, height: int, entries) -> "WeightedPoints":
        """Build from (x, y, class_id[, alpha[, rank[, annotator]]]) tuples."""
        pts = []
        for e in entries:
            x, y, c = e[0], e[1], e[2]
            alpha = e[3] if len(e) > 3 else 1.0
            rank = e[4] if len(e) > 4 else 0
            annot = e[5] if len(e) > 5 else ""
            pts.append(PointLabel(y * width + x, c, alpha, rank, annot))
        return WeightedPoints(width, height, tuple(pts))


def _safe_log(x: np.ndarray | float) -> np.ndarray | float:
    return np.log(np.maximum(x, LOG_EPS))


def loss_pix(scores: ScoreMap, gt: LabelMap) -> LossValue:
    """Sum of per-pixel cross-entropy terms against a full label map.

    IGNORE pixels contribute zero loss and zero gradient. The gradient at a
    supervised pixel is softmax(s) minus the one-hot ground truth.
    """
    if (gt.height, gt.width) != (scores.height, scores.width):
        raise ValueError("score map and label map dimensions differ")
    labels = gt.flat()
    supervised = labels != IGNORE
    if supervised.any() and labels[supervised].max() >= scores.num_classes:
        raise ValueError("ground truth label >= number of classes")

    probs = softmax(scores).flat()
    idx = np.nonzero(supervised)[0]
    value = float(-np.sum(_safe_log(probs[idx, labels[idx]])))

    grad = np.zeros_like(probs)
    grad[idx] = probs[idx]
    grad[idx, labels[idx]] -= 1.0
    return LossValue(value, grad.reshape(scores.scores.shape))


def _argmax_pixels(probs_flat: np.ndarray, classes) -> dict[int, int]:
    """Per-class maximally scoring pixel; ties broken by lowest pixel index."""
    return {c: int(np.argmax(probs_flat[:, c])) for c in classes}


def loss_img(scores: ScoreMap, labels: ImageLevelLabels) -> LossValue:
    """Image-level cross-entropy on each class's maximally scoring pixel.

    Present classes are pushed toward probability one somewhere in the image;
    absent classes are pushed toward zero everywhere (via their own max
    pixel). The max-pixel selection is treated as a constant when
    differentiating, which is the standard subgradient.
    """
    labels.check_bounds(scores.num_classes)
    probs = softmax(scores).flat()
    grad = np.zeros_like(probs)

    present = sorted(labels.present)
    absent = sorted(labels.absent)
    t = _argmax_pixels(probs, present + absent)

    value = 0.0
    w_p = 1.0 / len(present)
    for c in present:
        i = t[c]
        value -= w_p * float(_safe_log(probs[i, c]))
        # d(-log S_c)/ds_j = S_j - 1[j = c] at the selected pixel
        grad[i] += w_p * probs[i]
        grad[i, c] -= w_p

    if absent:
        w_a = 1.0 / len(absent)
        for c in absent:
            i = t[c]
            p = probs[i, c]
            value -= w_a * float(_safe_log(1.0 - p))
            # d(-log(1 - S_c))/ds_j = S_c (1[j = c] - S_j) / (1 - S_c)
            denom = max(1.0 - p, LOG_EPS)
            grad[i] += w_a * p * (-probs[i]) / denom
            grad[i, c] += w_a * p / denom

    return LossValue(float(value), grad.reshape(scores.scores.shape))


def loss_point(scores: ScoreMap, points: WeightedPoints, labels: ImageLevelLabels) -> LossValue:
    """Image-level loss plus weighted cross-entropy on supervised pixels."""
    if (points.width, points.height) != (scores.width, scores.height):
        raise ValueError("point container dimensions differ from score map")
    bad = points.classes() & labels.absent
    if bad:
        raise ValueError(f"points labeled with absent classes: {sorted(bad)}")
    if not points.classes() <= labels.present:
        extra = points.classes() - labels.present
        raise ValueError(f"point classes not in the present set: {sorted(extra)}")

    base = loss_img(scores, labels)
    if len(points) == 0:
        return base
    probs = softmax(scores).flat()
    pix = np.array([p.pixel for p in points.points])
    cls = np.array([p.class_id for p in points.points])
    alpha = np.array([p.alpha for p in points.points])

    value = float(-np.sum(alpha * _safe_log(probs[pix, cls])))
    grad = np.zeros_like(probs)
    np.add.at(grad, pix, alpha[:, None] * probs[pix])
    np.subtract.at(grad, (pix, cls), alpha)
    point_term = LossValue(value, grad.reshape(scores.scores.shape))
    return base + point_term


def loss_obj(scores: ScoreMap, prior: ObjectnessMap, catalog: ClassCatalog) -> LossValue:
    """Binary cross-entropy between the objectness prior and the total
    probability mass the model places on object classes at each pixel.
    """
    if (prior.height, prior.width) != (scores.height, scores.width):
        raise ValueError("objectness prior dimensions differ from score map")
    if catalog.num_classes != scores.num_classes:
        raise ValueError("catalog class count differs from score map")

    probs = softmax(scores).flat()
    p_obj = prior.values.reshape(-1)
    obj_cols = sorted(catalog.object_classes)
    q = probs[:, obj_cols].sum(axis=1)
    q = np.clip(q, LOG_EPS, 1.0 - LOG_EPS)

    n = probs.shape[0]
    value = float(-np.mean(p_obj * np.log(q) + (1.0 - p_obj) * np.log(1.0 - q)))

    # dq/ds_j = S_j (1[j in O] - q); dL/dq = -(P/q - (1-P)/(1-q)) / n
    dl_dq = -(p_obj / q - (1.0 - p_obj) / (1.0 - q)) / n
    is_obj = np.zeros(scores.num_classes)
    is_obj[obj_cols] = 1.0
    grad = dl_dq[:, None] * probs * (is_obj[None, :] - q[:, None])

    # Tiny negative values can arise from rounding when the prior exactly
    # matches the predicted mass; the true loss is >= 0.
    return LossValue(max(value, 0.0), grad.reshape(scores.scores.shape))


def combined_loss(
    scores: ScoreMap,
    supervision,
    prior: ObjectnessMap | None,
    lambda_obj: float,
    catalog: ClassCatalog,
) -> LossValue:
    """Dispatch on the supervision kind and add the weighted objectness term.

    `supervision` is a SupervisionRecord; full masks use the per-pixel loss,
    image-level labels the image loss, and points or squiggles the point
    loss. Requires a prior exactly when lambda_obj > 0.
    """
    from .supervision import SupervisionKind  # local import to avoid a cycle

    if lambda_obj < 0:
        raise ValueError("lambda_obj must be non-negative")
    if (lambda_obj > 0) != (prior is not None):
        raise ValueError("objectness prior must be supplied iff lambda_obj > 0")

    kind = supervision.kind
    # Hybrid members behave as whichever payload they carry.
    if kind is SupervisionKind.HYBRID_MEMBER:
        kind = SupervisionKind.FULL if supervision.mask is not None else SupervisionKind.POINTS_1

    if kind is SupervisionKind.FULL:
        if lambda_obj > 0:
            warnings.warn(
                "objectness prior combined with full supervision; it is "
                "normally paired with weak supervision only",
                stacklevel=2,
            )
        base = loss_pix(scores, supervision.mask)
    elif kind is SupervisionKind.IMAGE_LEVEL:
        base = loss_img(scores, supervision.labels)
    elif kind in (SupervisionKind.POINTS_1, SupervisionKind.POINTS_ALL, SupervisionKind.SQUIGGLES):
        base = loss_point(scores, supervision.effective_points(), supervision.labels)
    else:
        raise ValueError(f"unsupported supervision kind: {kind}")

    if lambda_obj > 0:
        base = base + loss_obj(scores, prior, catalog).scaled(lambda_obj)
    return base
