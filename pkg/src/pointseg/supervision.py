"""Supervision payloads, point-weighting schemes, patch dilation, hybrids."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import IGNORE, ClassCatalog, LabelMap
from .losses import ImageLevelLabels, PointLabel, WeightedPoints


class SupervisionKind(enum.Enum):
    FULL = "full"
    IMAGE_LEVEL = "image_level"
    POINTS_1 = "points_1"
    POINTS_ALL = "points_all"
    SQUIGGLES = "squiggles"
    HYBRID_MEMBER = "hybrid_member"


class WeightSchemeKind(enum.Enum):
    UNIFORM_1_OVER_N = "uniform_1_over_n"
    ANNOTATOR_CONFIDENCE = "annotator_confidence"
    RANK_HALVING = "rank_halving"


@dataclass(frozen=True)
class WeightScheme:
    """How supervised-pixel weights are assigned.

    UNIFORM_1_OVER_N: every point gets 1/n, n = points in the image.
    ANNOTATOR_CONFIDENCE: confidence(annotator)/n, confidences in [0, 1].
    RANK_HALVING: 1/2^r where r is the point's per-class rank (first = 0).
    """

    kind: WeightSchemeKind
    confidences: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for annot, c in self.confidences.items():
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"confidence for {annot!r} must lie in [0, 1], got {c}")


@dataclass(frozen=True)
class SupervisionRecord:
    """Per-image supervision payload for one training image."""

    kind: SupervisionKind
    labels: ImageLevelLabels
    image_id: str = ""
    mask: LabelMap | None = None
    points: WeightedPoints | None = None
    squiggle_pixels: tuple[tuple[int, int], ...] | None = None  # (flat pixel, class)
    dims: tuple[int, int] | None = None  # (width, height); needed by squiggles
    # Classes in L whose presence is known without a click (background: the
    # annotation task never asks anyone to point at it).
    presence_only: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "presence_only", frozenset(self.presence_only))
        if self.kind is SupervisionKind.FULL and self.mask is None:
            raise ValueError("FULL supervision requires a mask")
        if self.kind in (SupervisionKind.POINTS_1, SupervisionKind.POINTS_ALL):
            if self.points is None or len(self.points) == 0:
                raise ValueError("point supervision requires a non-empty point set")
            missing = self.labels.present - self.points.classes() - self.presence_only
            if missing:
                raise ValueError(f"present classes without any point: {sorted(missing)}")
        if self.kind is SupervisionKind.IMAGE_LEVEL and (
            self.mask is not None or self.points is not None
        ):
            raise ValueError("image-level supervision carries neither mask nor points")
        if self.kind is SupervisionKind.SQUIGGLES:
            if not self.squiggle_pixels:
                raise ValueError("squiggle supervision requires squiggle pixels")
            if self.dims is None and self.mask is None:
                raise ValueError("squiggle supervision requires image dims")

    def effective_points(self) -> WeightedPoints:
        """Supervised pixels to feed the point loss.

        Squiggle records reuse the point machinery: every labeled squiggle
        pixel becomes a supervised point with uniform weight 1/n.
        """
        if self.kind is SupervisionKind.SQUIGGLES:
            n = len(self.squiggle_pixels)
            if self.dims is not None:
                width, height = self.dims
            else:
                width, height = self.mask.width, self.mask.height
            pts = tuple(
                PointLabel(pixel, class_id, 1.0 / n) for pixel, class_id in self.squiggle_pixels
            )
            return WeightedPoints(width, height, pts)
        if self.points is None:
            raise ValueError(f"{self.kind} record has no supervised points")
        return self.points


def assign_weights(points: WeightedPoints, scheme: WeightScheme) -> WeightedPoints:
    """Reassign point weights per the scheme; positions and count unchanged."""
    if len(points) == 0:
        raise ValueError("cannot assign weights to an empty point list")
    n = len(points)
    new_pts = []
    for p in points.points:
        if scheme.kind is WeightSchemeKind.UNIFORM_1_OVER_N:
            alpha = 1.0 / n
        elif scheme.kind is WeightSchemeKind.ANNOTATOR_CONFIDENCE:
            if p.annotator not in scheme.confidences:
                raise KeyError(f"no confidence recorded for annotator {p.annotator!r}")
            alpha = scheme.confidences[p.annotator] / n
            if alpha <= 0:
                raise ValueError(f"annotator {p.annotator!r} confidence yields non-positive weight")
        elif scheme.kind is WeightSchemeKind.RANK_HALVING:
            alpha = 1.0 / (2.0 ** p.rank)
        else:
            raise ValueError(f"unknown weight scheme {scheme.kind}")
        new_pts.append(replace(p, alpha=alpha))
    return WeightedPoints(points.width, points.height, tuple(new_pts))


def _disc_offsets(radius: float) -> list[tuple[int, int]]:
    r_int = int(math.floor(radius))
    out = []
    for dy in range(-r_int, r_int + 1):
        for dx in range(-r_int, r_int + 1):
            if dx * dx + dy * dy <= radius * radius:
                out.append((dx, dy))
    return out


def dilate_points(points: WeightedPoints, radius: float) -> WeightedPoints:
    """Expand each point to the in-bounds disc of the given radius.

    Each original point's disc carries the point's total weight, split
    uniformly over its surviving pixels. Pixels claimed by discs of
    different classes are dropped from all of them; same-class overlaps
    are merged with summed weights.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return points
    width, height = points.width, points.height
    offsets = _disc_offsets(radius)

    discs = []  # (point, [flat pixels])
    claims: dict[int, set[int]] = {}  # flat pixel -> set of class ids
    for p in points.points:
        py, px = divmod(p.pixel, width)
        pixels = []
        for dx, dy in offsets:
            x, y = px + dx, py + dy
            if 0 <= x < width and 0 <= y < height:
                i = y * width + x
                pixels.append(i)
                claims.setdefault(i, set()).add(p.class_id)
        discs.append((p, pixels))

    conflicted = {i for i, cls in claims.items() if len(cls) > 1}
    merged: dict[tuple[int, int], PointLabel] = {}
    for p, pixels in discs:
        kept = [i for i in pixels if i not in conflicted]
        if not kept:
            continue  # the whole disc was contested; the point drops out
        w = p.alpha / len(kept)
        for i in kept:
            key = (i, p.class_id)
            if key in merged:
                prev = merged[key]
                merged[key] = replace(prev, alpha=prev.alpha + w)
            else:
                merged[key] = PointLabel(i, p.class_id, w, p.rank, p.annotator)
    new_pts = tuple(merged[k] for k in sorted(merged))
    return WeightedPoints(width, height, new_pts)


def derive_image_labels(
    mask: LabelMap,
    catalog: ClassCatalog,
    include_background: bool = True,
) -> ImageLevelLabels:
    """Image-level label sets read off a ground-truth mask.

    L = classes with at least one non-IGNORE pixel; L' = the object classes
    not present. Background classes never enter L' (nobody marks background
    "absent"); with include_background=False they are dropped from L too,
    leaving the pure object-task view.
    """
    present = mask.present_classes()
    if not present:
        raise ValueError("mask has no non-IGNORE pixels")
    bad = {c for c in present if c >= catalog.num_classes}
    if bad:
        raise ValueError(f"mask labels out of catalog range: {sorted(bad)}")
    if not include_background:
        present &= set(catalog.object_classes)
        if not present:
            raise ValueError("mask contains no object-class pixels")
    absent = set(catalog.object_classes) - present
    return ImageLevelLabels(frozenset(present), frozenset(absent))


def compose_hybrid(
    full_records: list[SupervisionRecord],
    point_records: list[SupervisionRecord],
    n_full: int,
    seed: int,
) -> list[SupervisionRecord]:
    """Mix a seeded sample of n_full fully-supervised images into a
    point-supervised dataset; all other images keep their point records.
    """
    if len(full_records) != len(point_records):
        raise ValueError("full and point record lists must be parallel")
    if n_full < 0:
        raise ValueError("n_full must be >= 0")
    if n_full > len(full_records):
        raise ValueError("n_full exceeds the dataset size")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(full_records), size=n_full, replace=False).tolist())
    return [
        full_records[i] if i in chosen else point_records[i] for i in range(len(full_records))
    ]


def record_to_json(record: SupervisionRecord, mask_path: str | None = None) -> dict:
    """JSON-serializable form; full masks are referenced by path, not inlined."""
    out = {
        "image_id": record.image_id,
        "kind": record.kind.value,
        "labels": {
            "present": sorted(record.labels.present),
            "absent": sorted(record.labels.absent),
        },
        "mask": mask_path,
        "points": None,
        "squiggle_pixels": None,
    }
    if record.points is not None:
        w = record.points.width
        out["points"] = {
            "width": record.points.width,
            "height": record.points.height,
            "entries": [
                {
                    "x": p.pixel % w,
                    "y": p.pixel // w,
                    "class": p.class_id,
                    "alpha": p.alpha,
                    "rank": p.rank,
                    "annotator": p.annotator,
                }
                for p in record.points.points
            ],
        }
    if record.squiggle_pixels is not None:
        out["squiggle_pixels"] = [[pix, cls] for pix, cls in record.squiggle_pixels]
    return out
