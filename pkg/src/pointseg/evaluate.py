"""Segmentation evaluation: per-class IOU from dataset-wide confusion totals.

mIOU is computed from confusion counts aggregated over the whole dataset,
never as a mean of per-image IOUs; the two disagree whenever class
frequencies vary across images.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import IGNORE, ClassCatalog, LabelMap

# Marker for classes with zero union (never predicted, never present).
UNDEFINED = None


@dataclass(frozen=True)
class IOUReport:
    per_class_iou: dict[int, float | None]
    mean_iou: float
    true_positive: dict[int, int]
    false_positive: dict[int, int]
    false_negative: dict[int, int]

    def defined_classes(self) -> list[int]:
        return [c for c, v in self.per_class_iou.items() if v is not None]

    def to_json(self) -> str:
        payload = {
            "mean_iou": self.mean_iou,
            "per_class_iou": {str(c): v for c, v in self.per_class_iou.items()},
            "true_positive": {str(c): v for c, v in self.true_positive.items()},
            "false_positive": {str(c): v for c, v in self.false_positive.items()},
            "false_negative": {str(c): v for c, v in self.false_negative.items()},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_table(self, class_names: dict[int, str] | None = None) -> str:
        """Aligned per-class text table with the mean in the last column."""
        names = class_names or {}
        cols = [names.get(c, f"c{c}") for c in self.per_class_iou] + ["avg"]
        vals = [
            "-" if v is None else f"{100 * v:.1f}" for v in self.per_class_iou.values()
        ] + [f"{100 * self.mean_iou:.1f}"]
        width = max(len(s) for s in cols + vals) + 2
        header = "".join(s.rjust(width) for s in cols)
        row = "".join(s.rjust(width) for s in vals)
        return header + "\n" + row


def miou(pred: list[LabelMap], gt: list[LabelMap], catalog: ClassCatalog) -> IOUReport:
    """IOU per class and its mean over classes with non-zero union.

    Ground-truth IGNORE pixels are excluded entirely (they count neither
    for nor against any class).
    """
    if len(pred) != len(gt):
        raise ValueError("prediction and ground-truth lists differ in length")
    n = catalog.num_classes
    confusion = np.zeros((n, n), dtype=np.int64)
    for p, g in zip(pred, gt):
        if (p.height, p.width) != (g.height, g.width):
            raise ValueError("prediction and ground truth dimensions differ")
        pl, gl = p.flat(), g.flat()
        keep = gl != IGNORE
        if pl[keep].max(initial=0) >= n or gl[keep].max(initial=0) >= n:
            raise ValueError("label id out of catalog range")
        confusion += np.bincount(
            gl[keep] * n + pl[keep], minlength=n * n
        ).reshape(n, n)

    tp = np.diag(confusion)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    union = tp + fp + fn

    per_class: dict[int, float | None] = {}
    defined = []
    for c in range(n):
        if union[c] == 0:
            per_class[c] = UNDEFINED
        else:
            iou = float(tp[c]) / float(union[c])
            per_class[c] = iou
            defined.append(iou)
    mean = float(np.mean(defined)) if defined else 0.0
    return IOUReport(
        per_class_iou=per_class,
        mean_iou=mean,
        true_positive={c: int(tp[c]) for c in range(n)},
        false_positive={c: int(fp[c]) for c in range(n)},
        false_negative={c: int(fn[c]) for c in range(n)},
    )
