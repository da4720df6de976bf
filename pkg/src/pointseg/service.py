"""HTTP service that hands annotation tasks to the browser UI and collects
the resulting events.

Queue directory layout (produced by `pointseg datagen --queue`):

    queue.json   task order, batch geometry, class palette
    images/      8-bit RGB PNGs served to the client
    truth/       masks for the planted gold-standard images (server side
                 only; the planted flag is never exposed over the API)
    events.log   append-only JSON lines, one accepted event per line

Events are appended and flushed to disk before the request is acknowledged;
replaying the log reconstructs the queue state exactly.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response

from .annosim import AnnotationEvent, PlantedImage, quality_control
from .core import ClassCatalog, load_mask_png


@dataclass
class QueueTask:
    task_id: str
    image_id: str
    mode: str  # "point" | "all-points" | "squiggle"
    planted: bool = False
    issued_at: float | None = None
    completed: bool = False


@dataclass
class AnnotationTaskQueue:
    """Ordered task list with atomic handout and an append-only event log."""

    root: Path
    tasks: list[QueueTask]
    classes: list[dict]
    batch_size: int
    planted_per_batch: int
    pass_threshold: int
    num_classes: int
    reissue_timeout: float | None = None
    events: dict[tuple[str, str], AnnotationEvent] = field(default_factory=dict)
    batch_status: dict[int, str] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _truths: dict[str, PlantedImage] = field(default_factory=dict, repr=False)

    @staticmethod
    def load(root, reissue_timeout: float | None = None) -> "AnnotationTaskQueue":
        root = Path(root)
        spec = json.loads((root / "queue.json").read_text())
        tasks = [
            QueueTask(task_id=t["task_id"], image_id=t["image_id"], mode=t["mode"],
                      planted=bool(t.get("planted", False)))
            for t in spec["tasks"]
        ]
        queue = AnnotationTaskQueue(
            root=root,
            tasks=tasks,
            classes=spec["classes"],
            batch_size=int(spec.get("batch_size", 50)),
            planted_per_batch=int(spec.get("planted_per_batch", 10)),
            pass_threshold=int(spec.get("pass_threshold", 8)),
            num_classes=int(spec["num_classes"]),
            reissue_timeout=reissue_timeout,
        )
        catalog = ClassCatalog.with_background_zero(queue.num_classes)
        for task in tasks:
            if task.planted and task.image_id not in queue._truths:
                mask = load_mask_png(root / "truth" / f"{task.image_id}.png",
                                     num_classes=queue.num_classes)
                queue._truths[task.image_id] = PlantedImage.from_mask(
                    task.image_id, mask, catalog
                )
        queue._replay_log()
        return queue

    # -- log -------------------------------------------------------------

    @property
    def log_path(self) -> Path:
        return self.root / "events.log"

    def _replay_log(self) -> None:
        if not self.log_path.is_file():
            return
        for line in self.log_path.read_text().splitlines():
            if not line.strip():
                continue
            event = AnnotationEvent.from_json(json.loads(line))
            self._register(event, persist=False)

    def _append_log(self, event: AnnotationEvent) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.to_json()) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- task handout ------------------------------------------------------

    def next_task(self) -> QueueTask | None:
        now = time.monotonic()
        with self._lock:
            for task in self.tasks:
                if task.completed:
                    continue
                if task.issued_at is None:
                    task.issued_at = now
                    return task
                if (
                    self.reissue_timeout is not None
                    and now - task.issued_at > self.reissue_timeout
                ):
                    task.issued_at = now
                    return task
        return None

    # -- event intake ------------------------------------------------------

    def _find_task(self, event: AnnotationEvent) -> QueueTask | None:
        for task in self.tasks:
            if task.image_id == event.image_id and task.mode == event.task:
                return task
        return None

    def _register(self, event: AnnotationEvent, persist: bool) -> dict:
        task = self._find_task(event)
        if task is None:
            raise KeyError(f"no queued task for image {event.image_id!r} mode {event.task!r}")
        key = (event.image_id, event.task)
        if key in self.events:
            raise FileExistsError(f"task for image {event.image_id!r} already submitted")
        if persist:
            self._append_log(event)
        self.events[key] = event
        task.completed = True
        return self._maybe_close_batch(task)

    def submit(self, event: AnnotationEvent) -> dict:
        with self._lock:
            return self._register(event, persist=True)

    # -- batches and quality control ----------------------------------------

    def _batch_index(self, task: QueueTask) -> int:
        return self.tasks.index(task) // self.batch_size

    def _batch_tasks(self, index: int) -> list[QueueTask]:
        return self.tasks[index * self.batch_size:(index + 1) * self.batch_size]

    def _maybe_close_batch(self, task: QueueTask) -> dict:
        index = self._batch_index(task)
        batch = self._batch_tasks(index)
        if all(t.completed for t in batch):
            planted = [self._truths[t.image_id] for t in batch if t.planted]
            if planted:
                events = [self.events[(t.image_id, t.mode)] for t in batch]
                result = quality_control(events, planted, self.pass_threshold)
                self.batch_status[index] = result.status
                return {"qc_status": result.status, "batch": index,
                        "accuracy": result.per_annotator_accuracy}
            self.batch_status[index] = "PASS"
            return {"qc_status": "PASS", "batch": index, "accuracy": {}}
        return {"qc_status": "PENDING", "batch": index, "accuracy": {}}

    def progress(self) -> dict:
        with self._lock:
            completed = sum(t.completed for t in self.tasks)
            issued = sum(t.issued_at is not None and not t.completed for t in self.tasks)
            return {
                "total": len(self.tasks),
                "completed": completed,
                "issued": issued,
                "batches": [
                    {"index": i, "qc_status": self.batch_status.get(i, "PENDING")}
                    for i in range((len(self.tasks) + self.batch_size - 1) // self.batch_size)
                ],
            }


def create_app(queue: AnnotationTaskQueue) -> FastAPI:
    app = FastAPI(title="pointseg annotation service")

    @app.get("/api/tasks/next")
    def tasks_next():
        task = queue.next_task()
        if task is None:
            return Response(status_code=204)
        return {
            "task_id": task.task_id,
            "image_url": f"/images/{task.image_id}",
            "classes": queue.classes,
            "mode": task.mode,
        }

    @app.get("/images/{image_id}")
    def image(image_id: str):
        path = queue.root / "images" / f"{image_id}.png"
        if "/" in image_id or "\\" in image_id or not path.is_file():
            return Response(status_code=404, content=b"unknown image")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.post("/api/annotations")
    async def annotations(request: Request):
        try:
            payload = json.loads(await request.body())
            event = AnnotationEvent.from_json(payload)
        except (ValueError, TypeError) as exc:
            return Response(
                status_code=400,
                content=json.dumps({"error": str(exc)}),
                media_type="application/json",
            )
        try:
            outcome = queue.submit(event)
        except KeyError as exc:
            return Response(
                status_code=404,
                content=json.dumps({"error": str(exc.args[0])}),
                media_type="application/json",
            )
        except FileExistsError as exc:
            return Response(
                status_code=409,
                content=json.dumps({"error": str(exc)}),
                media_type="application/json",
            )
        return outcome

    @app.get("/api/progress")
    def progress():
        return queue.progress()

    return app


def serve_annotation(port: int, queue_dir, reissue_timeout: float | None = None) -> None:
    """Run the annotation service until interrupted. PORT env overrides."""
    import uvicorn

    port = int(os.environ.get("PORT", port))
    queue = AnnotationTaskQueue.load(queue_dir, reissue_timeout=reissue_timeout)
    app = create_app(queue)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
