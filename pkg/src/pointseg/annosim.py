"""Synthetic scenes, simulated annotators, and gold-standard quality control.

Scenes are desk-scale stand-ins for a real photo dataset: colored shapes
(discs, rectangles, triangles) on a textured background, with a 1-pixel
IGNORE ring around every shape emulating "difficult" boundary pixels.

Annotators are simulated with the measured human behavior: clicks land near
instance centroids, a known fraction fall on the wrong class or on
boundary pixels, some present classes are mistakenly marked absent, and
some instances go unannotated in the all-instances task. Click times follow
a log-normal model around the measured medians.
"""

from __future__ import annotations

import colorsys
import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import IGNORE, ClassCatalog, LabelMap
from .losses import PointLabel, WeightedPoints

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


class TaskKind(enum.Enum):
    ONE_PER_CLASS = "point"
    ALL_INSTANCES = "all-points"
    SQUIGGLE = "squiggle"


# ---------------------------------------------------------------------------
# scene generation

@dataclass(frozen=True)
class SceneConfig:
    width: int = 48
    height: int = 48
    num_object_classes: int = 5
    shapes_min: int = 1
    shapes_max: int = 3
    shape_kinds: tuple[str, ...] = ("disc", "rectangle", "triangle")
    size_min: int = 5
    size_max: int = 10
    color_jitter: float = 0.12
    background_noise: float = 0.08
    # Two-tone shapes: each instance blends from its class color at the rim
    # to an instance-specific random color over the inner core_fraction of
    # the shape. Centroid clicks then mostly label class-uninformative
    # center pixels, while the class-colored rims are densely labeled only
    # by full masks.
    core_fraction: float = 0.0
    seed: int = 0
    palette: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self):
        if self.shapes_min < 1:
            raise ValueError("scenes must contain at least one shape")
        if self.shapes_max < self.shapes_min:
            raise ValueError("shapes_max must be >= shapes_min")
        if self.size_max * 2 + 4 > min(self.width, self.height):
            raise ValueError("shapes too large to fit fully in bounds")
        if self.num_object_classes < 1:
            raise ValueError("need at least one object class")
        if not 0.0 <= self.core_fraction < 1.0:
            raise ValueError("core_fraction must lie in [0, 1)")

    def catalog(self) -> ClassCatalog:
        return ClassCatalog.with_background_zero(self.num_object_classes + 1)

    def class_color(self, class_id: int) -> tuple[float, float, float]:
        if self.palette is not None:
            return self.palette[class_id - 1]
        hue = (class_id - 1) / self.num_object_classes
        return colorsys.hsv_to_rgb(hue, 0.65, 0.75)


def _shape_mask(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean footprint of one shape on a tight local grid."""
    if kind == "disc":
        r = size
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
        return xx * xx + yy * yy <= r * r
    if kind == "rectangle":
        w = size
        h = max(2, int(round(size * rng.uniform(0.5, 1.0))))
        return np.ones((2 * h + 1, 2 * w + 1), dtype=bool)
    if kind == "triangle":
        r = size
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
        # upward isoceles triangle: below the apex, inside both slanted edges
        return (yy >= -r / 2) & (yy <= r) & (np.abs(xx) * 2 <= (yy + r))
    raise ValueError(f"unknown shape kind {kind!r}")


def generate_scene(cfg: SceneConfig, index: int) -> tuple[np.ndarray, LabelMap]:
    """One deterministic scene: RGB image in [0, 1] and its label mask.

    Shapes never overlap (placement keeps a 1-pixel clearance so the IGNORE
    rings stay disjoint from other shapes). If not even one shape can be
    placed within the retry budget the scene is rejected.
    """
    rng = np.random.default_rng((cfg.seed, index))
    width, height = cfg.width, cfg.height
    n_classes = cfg.num_object_classes + 1

    labels = np.zeros((height, width), dtype=np.int64)
    occupied = np.zeros((height, width), dtype=bool)  # shapes plus clearance
    image = np.empty((height, width, 3))
    bg = 0.45 + rng.uniform(-0.15, 0.15, size=3)
    image[:] = bg

    n_shapes = int(rng.integers(cfg.shapes_min, cfg.shapes_max + 1))
    placed = 0
    for _ in range(n_shapes):
        class_id = int(rng.integers(1, n_classes))
        kind = cfg.shape_kinds[int(rng.integers(0, len(cfg.shape_kinds)))]
        size = int(rng.integers(cfg.size_min, cfg.size_max + 1))
        foot = _shape_mask(kind, size, rng)
        fh, fw = foot.shape
        ok = False
        for _ in range(50):
            y0 = int(rng.integers(1, height - fh)) if height - fh > 1 else 1
            x0 = int(rng.integers(1, width - fw)) if width - fw > 1 else 1
            region = np.zeros((height, width), dtype=bool)
            region[y0:y0 + fh, x0:x0 + fw] = foot
            clearance = ndimage.binary_dilation(region, structure=np.ones((3, 3)), iterations=2)
            if not (clearance & occupied).any():
                ok = True
                break
        if not ok:
            continue
        placed += 1
        labels[region] = class_id
        occupied |= clearance
        color = np.clip(
            np.asarray(cfg.class_color(class_id)) + rng.normal(0.0, cfg.color_jitter, size=3),
            0.0, 1.0,
        )
        image[region] = color
        if cfg.core_fraction > 0:
            # instance-specific center blend: same label, appearance that
            # identifies the instance rather than the class
            ys, xs = np.nonzero(region)
            cy, cx = ys.mean(), xs.mean()
            core_r = max(1.5, cfg.core_fraction * size)
            d = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
            w = np.clip(1.0 - d / core_r, 0.0, 1.0) ** 0.7
            center_color = rng.uniform(0.05, 0.95, size=3)
            image[ys, xs] = (1.0 - w)[:, None] * image[ys, xs] + w[:, None] * center_color

    if placed == 0:
        raise RuntimeError(f"could not place any shape in scene {index} within the retry budget")

    # 1-pixel "difficult" ring just outside each shape; visually a blend.
    shapes = labels > 0
    ring = ndimage.binary_dilation(shapes, structure=np.ones((3, 3))) & ~shapes
    labels[ring] = IGNORE
    image[ring] = 0.5 * image[ring] + 0.5 * bg

    image += rng.normal(0.0, cfg.background_noise, size=image.shape)
    return np.clip(image, 0.0, 1.0), LabelMap(labels, num_classes=n_classes)


# ---------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class Instance:
    class_id: int
    pixels: np.ndarray  # (n, 2) as (y, x)
    centroid: tuple[float, float]  # (y, x)
    bbox: tuple[int, int, int, int]  # inclusive (x0, y0, x1, y1)
    area: int

    @property
    def radius(self) -> float:
        return math.sqrt(self.area / math.pi)


def find_instances(mask: LabelMap, catalog: ClassCatalog) -> dict[int, list[Instance]]:
    """Connected components (4-connectivity) per present object class,
    largest first; the largest instance plays the role of the one an
    annotator notices first.
    """
    out: dict[int, list[Instance]] = {}
    for class_id in sorted(catalog.object_classes):
        binary = mask.labels == class_id
        if not binary.any():
            continue
        labeled, count = ndimage.label(binary, structure=FOUR_CONNECTED)
        instances = []
        for comp in range(1, count + 1):
            ys, xs = np.nonzero(labeled == comp)
            instances.append(
                Instance(
                    class_id=class_id,
                    pixels=np.stack([ys, xs], axis=1),
                    centroid=(float(ys.mean()), float(xs.mean())),
                    bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
                    area=int(len(ys)),
                )
            )
        instances.sort(key=lambda inst: (-inst.area, inst.bbox))
        out[class_id] = instances
    return out


# ---------------------------------------------------------------------------
# annotator model

@dataclass(frozen=True)
class AnnotatorProfile:
    """Timing and error model of a simulated human annotator.

    Default rates are the measured ones: 1.0% of present classes marked
    absent; 7.2% wrong-class and 0.8% boundary clicks on the one-point
    task; 7.9% missed instances, 14.8% wrong-class and 1.6% boundary
    clicks on the all-instances task; 6.3% wrong-class and 1.4% boundary
    pixels on squiggles.
    """

    absent_error_rate: float = 0.010
    point_wrong_class_rate: float = 0.072
    point_difficult_rate: float = 0.008
    allpoints_miss_rate: float = 0.079
    allpoints_wrong_class_rate: float = 0.148
    allpoints_difficult_rate: float = 0.016
    squiggle_wrong_rate: float = 0.063
    squiggle_difficult_rate: float = 0.014
    t_first_click_median: float = 2.4
    t_extra_click_median: float = 0.9
    t_squiggle_median: float = 10.9
    t_absent_per_class: float = 1.0
    click_time_spread: float = 0.25  # log-normal sigma around the medians
    click_position_sd_factor: float = 0.2  # of the instance radius
    annotator_id: str = "sim-0"

    def __post_init__(self):
        for name in (
            "absent_error_rate", "point_wrong_class_rate", "point_difficult_rate",
            "allpoints_miss_rate", "allpoints_wrong_class_rate", "allpoints_difficult_rate",
            "squiggle_wrong_rate", "squiggle_difficult_rate",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @staticmethod
    def perfect(annotator_id: str = "perfect") -> "AnnotatorProfile":
        return AnnotatorProfile(
            absent_error_rate=0.0,
            point_wrong_class_rate=0.0,
            point_difficult_rate=0.0,
            allpoints_miss_rate=0.0,
            allpoints_wrong_class_rate=0.0,
            allpoints_difficult_rate=0.0,
            squiggle_wrong_rate=0.0,
            squiggle_difficult_rate=0.0,
            annotator_id=annotator_id,
        )


@dataclass(frozen=True)
class Click:
    x: int
    y: int
    class_id: int
    t_ms: int


@dataclass(frozen=True)
class AnnotationEvent:
    """Wire-format annotation payload, shared with the browser UI."""

    image_id: str
    task: str
    annotator: str
    clicks: tuple[Click, ...] = ()
    strokes: tuple[tuple[tuple[int, int], ...], ...] = ()  # [(x, y), ...] per stroke
    class_absent: tuple[int, ...] = ()
    duration_ms: int | None = None  # simulation bookkeeping; not serialized

    def __post_init__(self):
        times = [c.t_ms for c in self.clicks]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("click timestamps must be strictly increasing")
        if any(t < 0 for t in times):
            raise ValueError("click timestamps must be non-negative")

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "task": self.task,
            "annotator": self.annotator,
            "clicks": [
                {"x": c.x, "y": c.y, "class": c.class_id, "t_ms": c.t_ms} for c in self.clicks
            ],
            "strokes": [[{"x": x, "y": y} for x, y in stroke] for stroke in self.strokes],
            "class_absent": list(self.class_absent),
        }

    @staticmethod
    def from_json(obj: dict) -> "AnnotationEvent":
        required = {"image_id", "task", "annotator", "clicks", "strokes", "class_absent"}
        if not isinstance(obj, dict):
            raise ValueError("annotation event must be a JSON object")
        missing = required - obj.keys()
        if missing:
            raise ValueError(f"annotation event missing fields: {sorted(missing)}")
        extra = obj.keys() - required
        if extra:
            raise ValueError(f"annotation event has unknown fields: {sorted(extra)}")
        if not isinstance(obj["image_id"], str) or not isinstance(obj["annotator"], str):
            raise ValueError("image_id and annotator must be strings")
        if obj["task"] not in {t.value for t in TaskKind}:
            raise ValueError(f"unknown task kind {obj['task']!r}")
        clicks = []
        for c in obj["clicks"]:
            if not isinstance(c, dict) or {"x", "y", "class", "t_ms"} - c.keys():
                raise ValueError("each click needs x, y, class, t_ms")
            if not all(isinstance(c[k], int) and not isinstance(c[k], bool)
                       for k in ("x", "y", "class", "t_ms")):
                raise ValueError("click fields must be integers")
            clicks.append(Click(c["x"], c["y"], c["class"], c["t_ms"]))
        strokes = []
        for stroke in obj["strokes"]:
            pts = []
            for p in stroke:
                if not isinstance(p, dict) or {"x", "y"} - p.keys():
                    raise ValueError("each stroke point needs x and y")
                if not all(isinstance(p[k], int) and not isinstance(p[k], bool) for k in ("x", "y")):
                    raise ValueError("stroke coordinates must be integers")
                pts.append((p["x"], p["y"]))
            strokes.append(tuple(pts))
        absent = obj["class_absent"]
        if not all(isinstance(a, int) and not isinstance(a, bool) for a in absent):
            raise ValueError("class_absent must be a list of integers")
        return AnnotationEvent(
            image_id=obj["image_id"],
            task=obj["task"],
            annotator=obj["annotator"],
            clicks=tuple(clicks),
            strokes=tuple(strokes),
            class_absent=tuple(absent),
        )


class _Clock:
    """Millisecond task clock with strictly increasing readings."""

    def __init__(self):
        self.ms = 0.0
        self.last_emitted = -1

    def advance(self, seconds: float) -> int:
        self.ms += seconds * 1000.0
        stamp = max(int(round(self.ms)), self.last_emitted + 1)
        self.last_emitted = stamp
        return stamp


def _lognormal_seconds(rng: np.random.Generator, median: float, sigma: float) -> float:
    return median * math.exp(sigma * rng.normal())


def _pick_pixel(rng: np.random.Generator, eligible: np.ndarray) -> tuple[int, int]:
    """Uniform (y, x) among the True entries of a boolean map."""
    ys, xs = np.nonzero(eligible)
    k = int(rng.integers(0, len(ys)))
    return int(ys[k]), int(xs[k])


def _centroid_click(rng: np.random.Generator, inst: Instance, sd_factor: float) -> tuple[int, int]:
    """Truncated Gaussian around the instance centroid, resampled until it
    lands on the instance (falls back to the nearest instance pixel).
    """
    sd = max(0.5, sd_factor * inst.radius)
    cy, cx = inst.centroid
    pixel_set = {(int(p[0]), int(p[1])) for p in inst.pixels}
    y = x = 0
    for _ in range(100):
        y = int(round(cy + sd * rng.normal()))
        x = int(round(cx + sd * rng.normal()))
        if (y, x) in pixel_set:
            return y, x
    d = np.abs(inst.pixels[:, 0] - y) + np.abs(inst.pixels[:, 1] - x)
    best = int(np.argmin(d))
    return int(inst.pixels[best, 0]), int(inst.pixels[best, 1])


def _corrupt_click(
    rng: np.random.Generator,
    mask: LabelMap,
    class_id: int,
    wrong_rate: float,
    difficult_rate: float,
) -> tuple[str, tuple[int, int] | None]:
    """Draw the click's fate: ('ok', None), or a displaced position."""
    u = rng.uniform()
    labels = mask.labels
    if u < wrong_rate:
        eligible = (labels != class_id) & (labels != IGNORE)
        if eligible.any():
            return "wrong", _pick_pixel(rng, eligible)
    elif u < wrong_rate + difficult_rate:
        eligible = labels == IGNORE
        if eligible.any():
            return "difficult", _pick_pixel(rng, eligible)
    return "ok", None


def simulate_point_annotator(
    mask: LabelMap,
    catalog: ClassCatalog,
    profile: AnnotatorProfile,
    task: TaskKind,
    seed,
    image_id: str = "",
) -> AnnotationEvent:
    """Simulated point annotation of one image.

    The annotator first scans the class list, marking absences (1 s each,
    including mistaken ones), then clicks near instance centroids. Wrong
    class and boundary ("difficult") errors displace the click onto a
    random pixel of that kind.
    """
    if task not in (TaskKind.ONE_PER_CLASS, TaskKind.ALL_INSTANCES):
        raise ValueError(f"not a point task: {task}")
    rng = np.random.default_rng(seed)
    instances = find_instances(mask, catalog)
    present = sorted(instances)
    if not present:
        raise ValueError("mask contains no object-class pixels")
    palette = sorted(catalog.object_classes)

    if task is TaskKind.ONE_PER_CLASS:
        wrong_rate = profile.point_wrong_class_rate
        difficult_rate = profile.point_difficult_rate
    else:
        wrong_rate = profile.allpoints_wrong_class_rate
        difficult_rate = profile.allpoints_difficult_rate

    absent: list[int] = []
    to_click: list[int] = []
    for c in palette:
        if c not in present:
            absent.append(c)
        elif rng.uniform() < profile.absent_error_rate:
            absent.append(c)  # present class mistakenly marked absent
        else:
            to_click.append(c)

    clock = _Clock()
    for _ in absent:
        clock.advance(profile.t_absent_per_class)

    clicks: list[Click] = []
    for c in to_click:
        targets = instances[c] if task is TaskKind.ALL_INSTANCES else instances[c][:1]
        first = True  # first emitted click of a class pays the first-click time
        for inst in targets:
            if task is TaskKind.ALL_INSTANCES and rng.uniform() < profile.allpoints_miss_rate:
                continue
            fate, displaced = _corrupt_click(rng, mask, c, wrong_rate, difficult_rate)
            if fate == "ok" or displaced is None:
                y, x = _centroid_click(rng, inst, profile.click_position_sd_factor)
            else:
                y, x = displaced
            median = profile.t_first_click_median if first else profile.t_extra_click_median
            t = clock.advance(_lognormal_seconds(rng, median, profile.click_time_spread))
            clicks.append(Click(x, y, c, t))
            first = False

    return AnnotationEvent(
        image_id=image_id,
        task=task.value,
        annotator=profile.annotator_id,
        clicks=tuple(clicks),
        strokes=(),
        class_absent=tuple(absent),
        duration_ms=clock.last_emitted if clicks else int(round(clock.ms)),
    )


def simulate_squiggle_annotator(
    mask: LabelMap,
    catalog: ClassCatalog,
    profile: AnnotatorProfile,
    seed,
    image_id: str = "",
    stroke_length: int = 30,
) -> AnnotationEvent:
    """One freehand squiggle per present class, drawn as a random walk
    inside the class's largest instance; a fraction of stroke pixels is
    displaced onto wrong-class or boundary pixels.

    Strokes are emitted in ascending class order of the classes not marked
    absent, which is how consumers recover each stroke's class.
    """
    rng = np.random.default_rng(seed)
    instances = find_instances(mask, catalog)
    present = sorted(instances)
    if not present:
        raise ValueError("mask contains no object-class pixels")
    palette = sorted(catalog.object_classes)

    absent: list[int] = []
    to_draw: list[int] = []
    for c in palette:
        if c not in present:
            absent.append(c)
        elif rng.uniform() < profile.absent_error_rate:
            absent.append(c)
        else:
            to_draw.append(c)

    clock = _Clock()
    for _ in absent:
        clock.advance(profile.t_absent_per_class)

    labels = mask.labels
    strokes: list[tuple[tuple[int, int], ...]] = []
    for c in to_draw:
        inst = instances[c][0]
        pixel_set = {(int(p[0]), int(p[1])) for p in inst.pixels}
        d = np.abs(inst.pixels[:, 0] - inst.centroid[0]) + np.abs(inst.pixels[:, 1] - inst.centroid[1])
        start = int(np.argmin(d))
        y, x = int(inst.pixels[start, 0]), int(inst.pixels[start, 1])
        walk = [(y, x)]
        prev = None
        for _ in range(stroke_length - 1):
            options = [
                (y + dy, x + dx)
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if (y + dy, x + dx) in pixel_set
            ]
            if len(options) > 1 and prev in options:
                options.remove(prev)
            if not options:
                break
            prev = (y, x)
            y, x = options[int(rng.integers(0, len(options)))]
            walk.append((y, x))

        pts: list[tuple[int, int]] = []
        for (wy, wx) in walk:
            u = rng.uniform()
            if u < profile.squiggle_wrong_rate:
                eligible = (labels != c) & (labels != IGNORE)
                if eligible.any():
                    wy, wx = _pick_pixel(rng, eligible)
            elif u < profile.squiggle_wrong_rate + profile.squiggle_difficult_rate:
                eligible = labels == IGNORE
                if eligible.any():
                    wy, wx = _pick_pixel(rng, eligible)
            pts.append((wx, wy))
        strokes.append(tuple(pts))
        clock.advance(_lognormal_seconds(rng, profile.t_squiggle_median, profile.click_time_spread))

    return AnnotationEvent(
        image_id=image_id,
        task=TaskKind.SQUIGGLE.value,
        annotator=profile.annotator_id,
        clicks=(),
        strokes=tuple(strokes),
        class_absent=tuple(absent),
        duration_ms=int(round(clock.ms)),
    )


def sample_random_points(mask: LabelMap, catalog: ClassCatalog, seed) -> WeightedPoints:
    """One uniformly random non-IGNORE pixel per present object class.

    The stand-in for supervision sampled from ground truth instead of a
    human click; spatial variety is what distinguishes it from the
    centroid-biased human model.
    """
    rng = np.random.default_rng(seed)
    labels = mask.labels
    width = mask.width
    pts = []
    for c in sorted(catalog.object_classes):
        eligible = labels == c
        if c in mask.present_classes() and not eligible.any():
            warnings.warn(f"class {c} has no eligible pixels; skipped", stacklevel=2)
            continue
        if not eligible.any():
            continue
        y, x = _pick_pixel(rng, eligible)
        pts.append(PointLabel(y * width + x, c, 1.0, 0, "random"))
    return WeightedPoints(mask.width, mask.height, tuple(pts))


# ---------------------------------------------------------------------------
# quality control

@dataclass(frozen=True)
class PlantedImage:
    """Gold-standard image: tight instance boxes and counts per class."""

    image_id: str
    present: frozenset[int]
    boxes: dict[int, tuple[tuple[int, int, int, int], ...]] = field(default_factory=dict)
    instance_counts: dict[int, int] = field(default_factory=dict)
    palette: tuple[int, ...] = ()

    @staticmethod
    def from_mask(image_id: str, mask: LabelMap, catalog: ClassCatalog) -> "PlantedImage":
        instances = find_instances(mask, catalog)
        return PlantedImage(
            image_id=image_id,
            present=frozenset(instances),
            boxes={c: tuple(i.bbox for i in insts) for c, insts in instances.items()},
            instance_counts={c: len(insts) for c, insts in instances.items()},
            palette=tuple(sorted(catalog.object_classes)),
        )


@dataclass(frozen=True)
class QCResult:
    status: str  # "PASS" | "FAIL"
    n_correct: int
    n_planted: int
    per_image: dict[str, bool]
    per_annotator_accuracy: dict[str, float]


def _point_in_box(x: int, y: int, box: tuple[int, int, int, int]) -> bool:
    x0, y0, x1, y1 = box
    return x0 <= x <= x1 and y0 <= y <= y1


def event_is_correct(event: AnnotationEvent, truth: PlantedImage) -> bool:
    """Gold-standard check for one planted image.

    Every click must fall inside a tight bounding box of an instance of the
    claimed class; claimed-absent classes must truly be absent; every
    palette class must be addressed. The all-instances task additionally
    requires at least as many clicks as known instances.
    """
    claimed_absent = set(event.class_absent)
    if claimed_absent & truth.present:
        return False

    for c in event.clicks:
        boxes = truth.boxes.get(c.class_id, ())
        if not any(_point_in_box(c.x, c.y, b) for b in boxes):
            return False

    claimed_present = [c for c in truth.palette if c not in claimed_absent]
    if event.task == TaskKind.SQUIGGLE.value:
        if len(event.strokes) != len(claimed_present):
            return False
        for stroke, c in zip(event.strokes, claimed_present):
            if not stroke:
                return False
            x, y = stroke[0]
            boxes = truth.boxes.get(c, ())
            if not any(_point_in_box(x, y, b) for b in boxes):
                return False
    else:
        clicked = {c.class_id for c in event.clicks}
        if set(claimed_present) - clicked:
            return False
        if event.task == TaskKind.ALL_INSTANCES.value:
            known = sum(truth.instance_counts.values())
            if len(event.clicks) < known:
                return False
    return True


def quality_control(
    batch: list[AnnotationEvent],
    planted: list[PlantedImage],
    pass_threshold: int = 8,
) -> QCResult:
    """Evaluate a task batch against its planted gold-standard images.

    PASS requires at least `pass_threshold` of the planted images to be
    fully correct. Per-annotator accuracy over planted images feeds the
    confidence-based point weighting.
    """
    by_image: dict[str, AnnotationEvent] = {}
    for ev in batch:
        by_image[ev.image_id] = ev

    per_image: dict[str, bool] = {}
    per_annot_total: dict[str, int] = {}
    per_annot_correct: dict[str, int] = {}
    for truth in planted:
        ev = by_image.get(truth.image_id)
        if ev is None:
            raise ValueError(f"planted image {truth.image_id!r} missing from the batch")
        ok = event_is_correct(ev, truth)
        per_image[truth.image_id] = ok
        per_annot_total[ev.annotator] = per_annot_total.get(ev.annotator, 0) + 1
        per_annot_correct[ev.annotator] = per_annot_correct.get(ev.annotator, 0) + int(ok)

    n_correct = sum(per_image.values())
    accuracy = {
        a: per_annot_correct[a] / per_annot_total[a] for a in per_annot_total
    }
    status = "PASS" if n_correct >= pass_threshold else "FAIL"
    return QCResult(
        status=status,
        n_correct=n_correct,
        n_planted=len(planted),
        per_image=per_image,
        per_annotator_accuracy=accuracy,
    )


# ---------------------------------------------------------------------------
# events -> supervision

def points_from_event(event: AnnotationEvent, width: int, height: int) -> WeightedPoints:
    """Clicks as supervised points; per-class rank follows click order."""
    rank_counter: dict[int, int] = {}
    pts = []
    seen = set()
    for c in event.clicks:
        key = (c.y * width + c.x, c.class_id)
        if key in seen:
            continue  # duplicate click on the same pixel adds nothing
        seen.add(key)
        r = rank_counter.get(c.class_id, 0)
        rank_counter[c.class_id] = r + 1
        pts.append(PointLabel(key[0], c.class_id, 1.0, r, event.annotator))
    return WeightedPoints(width, height, tuple(pts))


def squiggle_pixels_from_event(
    event: AnnotationEvent, width: int, palette: list[int]
) -> tuple[tuple[int, int], ...]:
    """(flat pixel, class) pairs from strokes, classes recovered from the
    ascending-order convention; duplicate pixels are dropped.
    """
    claimed_present = [c for c in sorted(palette) if c not in set(event.class_absent)]
    if len(event.strokes) != len(claimed_present):
        raise ValueError(
            f"{len(event.strokes)} strokes for {len(claimed_present)} claimed-present classes"
        )
    out = []
    seen = set()
    for stroke, c in zip(event.strokes, claimed_present):
        for x, y in stroke:
            key = (y * width + x, c)
            if key not in seen:
                seen.add(key)
                out.append(key)
    return tuple(out)
