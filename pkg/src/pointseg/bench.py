"""Desk-scale benchmark: supervision regimes compared on synthetic scenes.

One fixed scene dataset is annotated at every supervision level (full
masks, image-level labels, simulated human clicks, squiggles, a hybrid
mix), the same architecture is trained under each regime with a shared
recipe, and test mIOU is compared.

Scenes are two-tone: each instance blends to an instance-specific center
color, so centroid-biased human clicks mostly label class-ambiguous pixels
while the class-colored rims are densely labeled only by masks. That gives
mask supervision the concave marginal value the hybrid regime relies on:
a handful of masks pins down the rim-color decision boundaries for every
image, which no amount of extra clicked points can.

Mask supervision is trained as dense per-pixel points with class-balanced
weights (weight mass `dense_mass` split evenly over present classes, then
over each class's pixels). This keeps mask gradients on the same scale as
the weak losses, so a single optimizer setting trains every regime,
including the hybrid mix; the unnormalized per-pixel sum would need a
learning rate ~3 orders of magnitude apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .annosim import (
    AnnotatorProfile,
    SceneConfig,
    TaskKind,
    generate_scene,
    points_from_event,
    sample_random_points,
    simulate_point_annotator,
    simulate_squiggle_annotator,
    squiggle_pixels_from_event,
)
from .core import IGNORE, ClassCatalog, LabelMap, predict, softmax
from .evaluate import miou
from .losses import ImageLevelLabels, PointLabel, WeightedPoints
from .model import InitMode, ModelConfig, TrainConfig, forward, init_params, train
from .objectness import ObjectnessMap, oracle_scorer, prior_from_windows
from .supervision import (
    SupervisionKind,
    SupervisionRecord,
    WeightScheme,
    WeightSchemeKind,
    assign_weights,
    compose_hybrid,
    derive_image_labels,
)

REGIMES = (
    "full",
    "hybrid",
    "points_obj",
    "points",
    "image_obj",
    "image",
    "squiggles_obj",
    "allpoints_obj",
    "random_points_obj",
)

# Regimes whose training objective includes the objectness term.
_OBJ_REGIMES = {"hybrid", "points_obj", "image_obj", "squiggles_obj",
                "allpoints_obj", "random_points_obj"}


def default_benchmark_scene() -> SceneConfig:
    return SceneConfig(
        width=48,
        height=48,
        num_object_classes=5,
        shapes_min=1,
        shapes_max=3,
        size_min=7,
        size_max=13,
        color_jitter=0.12,
        background_noise=0.08,
        core_fraction=0.4,
        seed=2024,
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    scene: SceneConfig = field(default_factory=default_benchmark_scene)
    n_train: int = 200
    n_test: int = 50
    hybrid_full_fraction: float = 0.05
    prior_windows: int = 400
    prior_noise_sd: float = 0.15
    prior_seed: int = 555
    model: ModelConfig = field(default_factory=lambda: ModelConfig(num_classes=6))
    learning_rate: float = 1e-2
    iterations: int = 400
    batch_size: int = 20
    weight_decay: float = 0.05
    lambda_obj: float = 1.0
    full_dense_mass: float = 4.0
    hybrid_dense_mass: float = 6.0
    profile: AnnotatorProfile = field(default_factory=AnnotatorProfile)
    train_overrides: dict = field(default_factory=dict)


@dataclass
class Benchmark:
    """Materialized dataset shared by all regimes."""

    cfg: BenchmarkConfig
    catalog: ClassCatalog
    train_images: list[np.ndarray]
    train_masks: list[LabelMap]
    test_images: list[np.ndarray]
    test_masks: list[LabelMap]
    priors: list[ObjectnessMap]


def build_benchmark(cfg: BenchmarkConfig) -> Benchmark:
    catalog = cfg.scene.catalog()
    train_images, train_masks, priors = [], [], []
    for i in range(cfg.n_train):
        img, mask = generate_scene(cfg.scene, i)
        train_images.append(img)
        train_masks.append(mask)
        windows = oracle_scorer(
            mask, catalog, cfg.prior_noise_sd, cfg.prior_windows, seed=(cfg.prior_seed, i)
        )
        priors.append(prior_from_windows(windows, dims=(mask.width, mask.height)))
    test_images, test_masks = [], []
    for i in range(cfg.n_train, cfg.n_train + cfg.n_test):
        img, mask = generate_scene(cfg.scene, i)
        test_images.append(img)
        test_masks.append(mask)
    return Benchmark(
        cfg=cfg,
        catalog=catalog,
        train_images=train_images,
        train_masks=train_masks,
        test_images=test_images,
        test_masks=test_masks,
        priors=priors,
    )


# ---------------------------------------------------------------------------
# record builders

def dense_mask_record(
    mask: LabelMap, catalog: ClassCatalog, image_id: str, mass: float
) -> SupervisionRecord:
    """Full supervision as dense class-balanced weighted points.

    Every non-IGNORE pixel becomes a supervised point; the weight mass is
    split evenly across present classes and then across each class's
    pixels, so small objects are not drowned out by background area.
    """
    flat = mask.flat()
    keep = np.nonzero(flat != IGNORE)[0]
    counts = np.bincount(flat[keep], minlength=catalog.num_classes)
    present = int((counts > 0).sum())
    alpha = mass / (present * counts[flat[keep]])
    pts = tuple(
        PointLabel(int(p), int(flat[p]), float(a)) for p, a in zip(keep, alpha)
    )
    labels = derive_image_labels(mask, catalog, include_background=True)
    return SupervisionRecord(
        SupervisionKind.POINTS_ALL,
        labels,
        image_id=image_id,
        points=WeightedPoints(mask.width, mask.height, pts),
    )


def _event_with_clicks(mask, catalog, profile, task, seed_parts):
    """Simulated annotation, re-assigned (new sub-seed) if no class was
    clicked: an event without any click cannot supervise points.
    """
    for attempt in range(10):
        ev = simulate_point_annotator(mask, catalog, profile, task, seed=(*seed_parts, attempt))
        if ev.clicks:
            return ev
    raise RuntimeError("annotator produced no clicks in 10 attempts")


def _point_records(bench: Benchmark, task: TaskKind, seed: int) -> list[SupervisionRecord]:
    cfg = bench.cfg
    uniform = WeightScheme(WeightSchemeKind.UNIFORM_1_OVER_N)
    records = []
    kind = (
        SupervisionKind.POINTS_1 if task is TaskKind.ONE_PER_CLASS
        else SupervisionKind.POINTS_ALL
    )
    for i, mask in enumerate(bench.train_masks):
        ev = _event_with_clicks(mask, bench.catalog, cfg.profile, task, (seed, i))
        points = assign_weights(points_from_event(ev, mask.width, mask.height), uniform)
        labels = ImageLevelLabels(
            present=frozenset(p.class_id for p in points.points),
            absent=frozenset(ev.class_absent),
        )
        records.append(SupervisionRecord(kind, labels, image_id=f"train{i}", points=points))
    return records


def _random_point_records(bench: Benchmark, seed: int) -> list[SupervisionRecord]:
    uniform = WeightScheme(WeightSchemeKind.UNIFORM_1_OVER_N)
    records = []
    for i, mask in enumerate(bench.train_masks):
        pts = assign_weights(sample_random_points(mask, bench.catalog, seed=(seed, i)), uniform)
        labels = derive_image_labels(mask, bench.catalog, include_background=False)
        records.append(
            SupervisionRecord(
                SupervisionKind.POINTS_1, labels, image_id=f"train{i}", points=pts
            )
        )
    return records


def _squiggle_records(bench: Benchmark, seed: int) -> list[SupervisionRecord]:
    cfg = bench.cfg
    palette = sorted(bench.catalog.object_classes)
    records = []
    for i, mask in enumerate(bench.train_masks):
        for attempt in range(10):
            ev = simulate_squiggle_annotator(
                mask, bench.catalog, cfg.profile, seed=(seed, i, attempt)
            )
            if ev.strokes:
                break
        else:
            raise RuntimeError("annotator drew no squiggles in 10 attempts")
        pixels = squiggle_pixels_from_event(ev, mask.width, palette)
        claimed_present = frozenset(c for c in palette if c not in set(ev.class_absent))
        records.append(
            SupervisionRecord(
                SupervisionKind.SQUIGGLES,
                ImageLevelLabels(claimed_present, frozenset(ev.class_absent)),
                image_id=f"train{i}",
                squiggle_pixels=pixels,
                dims=(mask.width, mask.height),
            )
        )
    return records


def _image_records(bench: Benchmark) -> list[SupervisionRecord]:
    return [
        SupervisionRecord(
            SupervisionKind.IMAGE_LEVEL,
            derive_image_labels(bench.train_masks[i], bench.catalog, include_background=False),
            image_id=f"train{i}",
        )
        for i in range(len(bench.train_masks))
    ]


def _dense_records(bench: Benchmark, mass: float) -> list[SupervisionRecord]:
    return [
        dense_mask_record(bench.train_masks[i], bench.catalog, f"train{i}", mass)
        for i in range(len(bench.train_masks))
    ]


def regime_records(bench: Benchmark, regime: str, seed: int) -> list[SupervisionRecord]:
    if regime == "full":
        return _dense_records(bench, bench.cfg.full_dense_mass)
    if regime in ("image", "image_obj"):
        return _image_records(bench)
    if regime in ("points", "points_obj"):
        return _point_records(bench, TaskKind.ONE_PER_CLASS, seed)
    if regime == "allpoints_obj":
        return _point_records(bench, TaskKind.ALL_INSTANCES, seed)
    if regime == "random_points_obj":
        return _random_point_records(bench, seed)
    if regime == "squiggles_obj":
        return _squiggle_records(bench, seed)
    if regime == "hybrid":
        n_full = max(1, int(round(bench.cfg.hybrid_full_fraction * len(bench.train_masks))))
        return compose_hybrid(
            _dense_records(bench, bench.cfg.hybrid_dense_mass),
            _point_records(bench, TaskKind.ONE_PER_CLASS, seed),
            n_full,
            seed,
        )
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


# ---------------------------------------------------------------------------
# training and evaluation

def regime_train_config(bench: Benchmark, regime: str, seed: int) -> TrainConfig:
    cfg = bench.cfg
    lam = cfg.lambda_obj if regime in _OBJ_REGIMES else 0.0
    base = TrainConfig(
        learning_rate=cfg.learning_rate,
        iterations=cfg.iterations,
        batch_size=cfg.batch_size,
        weight_decay=cfg.weight_decay,
        seed=seed,
        lambda_obj=lam,
    )
    if cfg.train_overrides:
        base = replace(base, **cfg.train_overrides)
    return base


def evaluate_params(bench: Benchmark, params) -> float:
    preds = [predict(softmax(forward(params, img))) for img in bench.test_images]
    return miou(preds, bench.test_masks, bench.catalog).mean_iou


def run_regime_full(bench: Benchmark, regime: str, seed: int):
    """Train one regime with one seed; returns (params, history, test mIOU)."""
    records = regime_records(bench, regime, seed)
    train_cfg = regime_train_config(bench, regime, seed)
    params = init_params(bench.cfg.model, InitMode.ZERO_CLASSIFIER, seed=seed)
    params, history = train(
        params,
        bench.train_images,
        records,
        train_cfg,
        bench.catalog,
        priors=bench.priors if train_cfg.lambda_obj > 0 else None,
    )
    return params, history, evaluate_params(bench, params)


def run_regime(bench: Benchmark, regime: str, seed: int) -> tuple[float, list[float]]:
    params, history, mean_iou = run_regime_full(bench, regime, seed)
    return mean_iou, history


def run_comparison(
    bench: Benchmark, regimes: tuple[str, ...], seeds: tuple[int, ...]
) -> dict[str, list[float]]:
    """mIOU per regime per seed."""
    return {r: [run_regime(bench, r, s)[0] for s in seeds] for r in regimes}
