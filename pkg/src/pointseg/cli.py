"""Command-line entry points: datagen, train, eval, budget, simulate, serve."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .annosim import (
    AnnotatorProfile,
    SceneConfig,
    TaskKind,
    generate_scene,
    simulate_point_annotator,
    simulate_squiggle_annotator,
)
from .budget import BudgetModel, annotation_time, fixed_budget_plan, hybrid_time
from .config import ConfigError, ExperimentConfig, parse_config
from .core import load_image_png, load_mask_png, predict, save_image_png, save_mask_png, softmax
from .evaluate import miou
from .model import forward, load_checkpoint, save_checkpoint
from .supervision import SupervisionKind


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _scene_from_args(args) -> SceneConfig:
    return SceneConfig(
        width=args.width,
        height=args.height,
        num_object_classes=args.classes,
        seed=args.seed,
    )


def cmd_datagen(args) -> int:
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    scene = _scene_from_args(args)
    ids = []
    for i in range(args.count):
        image_id = f"scene{i:04d}"
        img, mask = generate_scene(scene, i)
        save_image_png(img, out / "images" / f"{image_id}.png")
        save_mask_png(mask, out / "masks" / f"{image_id}.png")
        ids.append(image_id)
    manifest = {
        "scene": asdict(scene),
        "count": args.count,
        "num_classes": scene.num_object_classes + 1,
        "images": ids,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {args.count} scenes to {out}")
    if args.queue:
        _write_queue(out, scene, ids, args)
    return 0


def _write_queue(out: Path, scene: SceneConfig, ids: list[str], args) -> None:
    """Annotation-task queue: consecutive batches, planted gold tasks mixed
    in at seeded positions, planted identity kept server-side only.
    """
    rng = np.random.default_rng(scene.seed + 1)
    truth_dir = out / "truth"
    truth_dir.mkdir(exist_ok=True)
    modes = ["point", "all-points", "squiggle"]
    tasks = []
    batch = args.queue_batch
    planted_per_batch = args.queue_planted
    n_batches = max(1, len(ids) // batch)
    for b in range(n_batches):
        batch_ids = ids[b * batch:(b + 1) * batch]
        if len(batch_ids) < batch:
            break
        planted_slots = set(rng.choice(batch, size=planted_per_batch, replace=False).tolist())
        for slot, image_id in enumerate(batch_ids):
            mode = modes[slot % len(modes)] if args.queue_mixed else "point"
            planted = slot in planted_slots
            tasks.append(
                {
                    "task_id": f"task-{b:03d}-{slot:03d}",
                    "image_id": image_id,
                    "mode": mode,
                    "planted": planted,
                }
            )
            if planted:
                src = out / "masks" / f"{image_id}.png"
                (truth_dir / f"{image_id}.png").write_bytes(src.read_bytes())
    classes = [
        {
            "id": c,
            "name": f"class-{c}",
            "color": [int(round(255 * v)) for v in scene.class_color(c)],
        }
        for c in range(1, scene.num_object_classes + 1)
    ]
    queue = {
        "batch_size": batch,
        "planted_per_batch": planted_per_batch,
        "pass_threshold": args.queue_pass_threshold,
        "num_classes": scene.num_object_classes + 1,
        "classes": classes,
        "tasks": tasks,
    }
    (out / "queue.json").write_text(json.dumps(queue, indent=2))
    print(f"queue: {len(tasks)} tasks in batches of {batch} ({planted_per_batch} planted each)")


def _load_experiment(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _benchmark_from_config(cfg: ExperimentConfig) -> bench_mod.Benchmark:
    bc = bench_mod.BenchmarkConfig(
        scene=cfg.scene,
        n_train=cfg.n_train,
        n_test=cfg.n_test,
        hybrid_full_fraction=cfg.hybrid_full_fraction,
        prior_windows=cfg.prior_windows,
        prior_noise_sd=cfg.prior_noise_sd,
        prior_seed=cfg.prior_seed,
        model=cfg.model_config(cfg.scene.num_object_classes + 1),
        profile=cfg.profile,
        train_overrides=cfg.train_overrides,
    )
    return bench_mod.build_benchmark(bc)


def cmd_train(args) -> int:
    try:
        cfg = _load_experiment(args)
    except ConfigError as exc:
        return _fail(str(exc))
    if cfg.supervision not in bench_mod.REGIMES:
        return _fail(f"unknown supervision regime {cfg.supervision!r}; "
                     f"expected one of {', '.join(bench_mod.REGIMES)}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    bench = _benchmark_from_config(cfg)
    params, history, mean_iou = bench_mod.run_regime_full(bench, cfg.supervision, cfg.seed)

    save_checkpoint(params, out / "model.ckpt")
    with open(out / "loss_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, v in enumerate(history):
            writer.writerow([i, repr(v)])
    preds = [predict(softmax(forward(params, img))) for img in bench.test_images]
    report = miou(preds, bench.test_masks, bench.catalog)
    (out / "iou_report.json").write_text(report.to_json())
    print(report.to_table())
    print(f"supervision={cfg.supervision} seed={cfg.seed} test mIOU={mean_iou:.4f}")
    return 0


def cmd_eval(args) -> int:
    try:
        cfg = _load_experiment(args)
    except ConfigError as exc:
        return _fail(str(exc))
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        return _fail(f"checkpoint not found: {ckpt}")
    params = load_checkpoint(ckpt)
    bench = _benchmark_from_config(cfg)
    preds = [predict(softmax(forward(params, img))) for img in bench.test_images]
    report = miou(preds, bench.test_masks, bench.catalog)
    print(report.to_table())
    print(f"mIOU: {report.mean_iou:.4f}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "iou_report.json").write_text(report.to_json())
    return 0


_BUDGET_KINDS = [
    ("image_level", SupervisionKind.IMAGE_LEVEL),
    ("points_1", SupervisionKind.POINTS_1),
    ("points_all", SupervisionKind.POINTS_ALL),
    ("squiggles", SupervisionKind.SQUIGGLES),
    ("full", SupervisionKind.FULL),
]


def cmd_budget(args) -> int:
    model = BudgetModel()
    kinds = args.kinds.split(",") if args.kinds else [k for k, _ in _BUDGET_KINDS]
    lookup = dict(_BUDGET_KINDS)
    rows = []
    for name in kinds:
        if name not in lookup:
            return _fail(f"unknown supervision kind {name!r}")
        kind = lookup[name]
        plain = annotation_time(kind, model)
        with_obj = annotation_time(kind, model, objectness=True)
        row = {
            "kind": name,
            "seconds_per_image": round(plain, 2),
            "seconds_with_objectness": round(with_obj, 2),
        }
        if args.budget is not None:
            objectness = kind is not SupervisionKind.FULL
            row["images_within_budget"] = fixed_budget_plan(
                args.budget, kind, model, objectness=objectness
            )
        rows.append(row)
    header = f"{'kind':>12} {'s/img':>8} {'s/img+obj':>10}"
    if args.budget is not None:
        header += f" {'imgs@budget':>12}"
    print(header)
    for row in rows:
        line = f"{row['kind']:>12} {row['seconds_per_image']:>8.1f} {row['seconds_with_objectness']:>10.1f}"
        if args.budget is not None:
            line += f" {row['images_within_budget']:>12}"
        print(line)
    hybrid = hybrid_time(100, 10482, model)
    print(f"{'hybrid':>12} {hybrid:>8.1f}  (100 full + 10482 points_1+obj)")
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2))
    return 0


def cmd_simulate(args) -> int:
    src = Path(args.dataset)
    manifest_path = src / "manifest.json"
    if not manifest_path.is_file():
        return _fail(f"no manifest.json under {src}; run datagen first")
    manifest = json.loads(manifest_path.read_text())
    if not manifest["images"]:
        return _fail("dataset is empty")
    scene = SceneConfig(**manifest["scene"])
    catalog = scene.catalog()
    profile = AnnotatorProfile()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    task = TaskKind(args.task)
    events = []
    stats = {"clicks": 0, "wrong": 0, "difficult": 0}
    for i, image_id in enumerate(manifest["images"]):
        mask = load_mask_png(src / "masks" / f"{image_id}.png", manifest["num_classes"])
        if task is TaskKind.SQUIGGLE:
            ev = simulate_squiggle_annotator(mask, catalog, profile, seed=(args.seed, i),
                                             image_id=image_id)
        else:
            ev = simulate_point_annotator(mask, catalog, profile, task, seed=(args.seed, i),
                                          image_id=image_id)
        events.append(ev)
        for c in ev.clicks:
            stats["clicks"] += 1
            lab = int(mask.labels[c.y, c.x])
            if lab == 255:
                stats["difficult"] += 1
            elif lab != c.class_id:
                stats["wrong"] += 1

    with open(out / "events.jsonl", "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json()) + "\n")
    report = {
        "task": task.value,
        "images": len(events),
        "clicks": stats["clicks"],
        "empirical_wrong_class_rate": stats["wrong"] / stats["clicks"] if stats["clicks"] else None,
        "empirical_difficult_rate": stats["difficult"] / stats["clicks"] if stats["clicks"] else None,
        "target_wrong_class_rate": (
            profile.point_wrong_class_rate if task is TaskKind.ONE_PER_CLASS
            else profile.allpoints_wrong_class_rate if task is TaskKind.ALL_INSTANCES
            else profile.squiggle_wrong_rate
        ),
    }
    (out / "rate_report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    return 0


def cmd_serve(args) -> int:
    from .service import serve_annotation

    queue_dir = Path(args.queue_dir)
    if not (queue_dir / "queue.json").is_file():
        return _fail(f"no queue.json under {queue_dir}; run datagen --queue first")
    serve_annotation(args.port, queue_dir, reissue_timeout=args.reissue_timeout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointseg",
        description="Point-supervised segmentation: training, budgeting, simulation, serving",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a synthetic dataset (and optional task queue)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=250)
    p.add_argument("--width", type=int, default=48)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queue", action="store_true", help="also emit an annotation task queue")
    p.add_argument("--queue-batch", type=int, default=50)
    p.add_argument("--queue-planted", type=int, default=10)
    p.add_argument("--queue-pass-threshold", type=int, default=8)
    p.add_argument("--queue-mixed", action="store_true",
                   help="cycle point / all-points / squiggle tasks instead of point only")
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train one supervision regime from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the config's test split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("budget", help="annotation-time table and fixed-budget planning")
    p.add_argument("--kinds", default=None, help="comma-separated subset of kinds")
    p.add_argument("--budget", type=float, default=None, help="budget in seconds")
    p.add_argument("--json", default=None, help="also write the table as JSON")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("simulate", help="simulate annotators over a generated dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=["point", "all-points", "squiggle"], default="point")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="serve annotation tasks to the browser UI")
    p.add_argument("--queue-dir", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--reissue-timeout", type=float, default=None,
                   help="seconds before an issued, unfinished task is handed out again")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
