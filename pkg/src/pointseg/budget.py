"""Annotation-time model and fixed-budget planning.

Per-image times follow the measured cost structure: 1 s to mark each class
absent, 2.4 s (median) for the first click on a class, 0.9 s for each extra
instance click, 10.9 s per squiggle, 79 s per full instance segmentation,
with 1.5 classes and 2.8 instances per image on average. The objectness
prior adds an amortized 0.28 s/image when used.

annotation_time keeps full precision (e.g. 23.27 s for all-instance points);
planning helpers round per-kind times to 0.1 s first so their outputs line
up with the tabulated per-image costs at that precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .supervision import SupervisionKind


@dataclass(frozen=True)
class BudgetModel:
    t_absent_per_class: float = 1.0
    t_first_click: float = 2.4
    t_extra_click: float = 0.9
    t_squiggle: float = 10.9
    t_full_instance: float = 79.0
    classes_per_image: float = 1.5
    instances_per_image: float = 2.8
    num_classes: int = 20  # labelable object classes
    objectness_amortized: float = 0.28

    def __post_init__(self):
        for name in (
            "t_absent_per_class", "t_first_click", "t_extra_click",
            "t_squiggle", "t_full_instance", "classes_per_image",
            "instances_per_image", "objectness_amortized",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")

    @property
    def t_absent_scan(self) -> float:
        """Time to mark all absent classes on a typical image."""
        return (self.num_classes - self.classes_per_image) * self.t_absent_per_class


def annotation_time(
    kind: SupervisionKind,
    model: BudgetModel = BudgetModel(),
    objectness: bool = False,
) -> float:
    """Expected annotation seconds per image for a supervision kind."""
    m = model
    if kind is SupervisionKind.IMAGE_LEVEL:
        t = m.num_classes * m.t_absent_per_class
    elif kind is SupervisionKind.POINTS_1:
        t = m.t_absent_scan + m.classes_per_image * m.t_first_click
    elif kind is SupervisionKind.POINTS_ALL:
        t = (
            m.t_absent_scan
            + m.classes_per_image * m.t_first_click
            + (m.instances_per_image - m.classes_per_image) * m.t_extra_click
        )
    elif kind is SupervisionKind.SQUIGGLES:
        t = m.t_absent_scan + m.classes_per_image * m.t_squiggle
    elif kind is SupervisionKind.FULL:
        t = m.t_absent_scan + m.instances_per_image * m.t_full_instance
    else:
        raise ValueError(f"no annotation-time formula for kind {kind}")
    if objectness:
        t += m.objectness_amortized
    return t


def hybrid_time(n_full: int, n_point: int, model: BudgetModel = BudgetModel()) -> float:
    """Mean seconds per image when n_full images are fully annotated and
    n_point get one point per class plus the objectness prior.

    Component times are rounded to 0.1 s before averaging so the result
    matches the tabulated per-image costs (239.7 and 22.4 s).
    """
    if n_full < 0 or n_point < 0 or n_full + n_point == 0:
        raise ValueError("need a non-negative split with at least one image")
    t_full = round(annotation_time(SupervisionKind.FULL, model), 1)
    t_point = round(annotation_time(SupervisionKind.POINTS_1, model, objectness=True), 1)
    return (n_full * t_full + n_point * t_point) / (n_full + n_point)


def fixed_budget_plan(
    budget_seconds: float,
    kind: SupervisionKind,
    model: BudgetModel = BudgetModel(),
    objectness: bool = False,
) -> int:
    """Number of whole images annotatable within the budget.

    Uses the per-kind time rounded to 0.1 s; a tiny epsilon keeps exact
    multiples from flooring one short under binary floating point.
    """
    if budget_seconds < 0:
        raise ValueError("budget must be >= 0")
    t = round(annotation_time(kind, model, objectness=objectness), 1)
    return int(math.floor(budget_seconds / t + 1e-9))
