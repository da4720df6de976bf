"""Per-pixel objectness prior aggregated from scored windows.

The prior assigns each pixel the average score of all windows containing it,
computed with a summed-area accumulation in O(W*H + number of windows).
Window scorers are pluggable; two desk-scale scorers are provided, one that
peeks at ground truth and one that works from image color contrast alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import IGNORE, ClassCatalog, LabelMap, _frozen


@dataclass(frozen=True)
class ScoredWindow:
    """Axis-aligned window with inclusive pixel bounds and a score in [0, 1]."""

    x0: int
    y0: int
    x1: int
    y1: int
    score: float

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"degenerate window bounds {(self.x0, self.y0, self.x1, self.y1)}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("window bounds must be non-negative")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"window score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class ObjectnessMap:
    """Per-pixel probability of belonging to any object class, shape (H, W)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"objectness map must be (H, W), got shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("objectness values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def prior_from_windows(
    windows: list[ScoredWindow],
    dims: tuple[int, int],
    uncovered_value: float = 0.0,
) -> ObjectnessMap:
    """Average window score per pixel over all windows containing it.

    Pixels covered by no window get `uncovered_value` (default 0, read as
    "no evidence of objectness"). Deposits are accumulated on a difference
    grid and integrated with two cumulative sums.
    """
    width, height = dims
    score_acc = np.zeros((height + 1, width + 1))
    count_acc = np.zeros((height + 1, width + 1), dtype=np.int64)
    for w in windows:
        if w.x1 >= width or w.y1 >= height:
            raise ValueError(f"window {(w.x0, w.y0, w.x1, w.y1)} out of bounds for {width}x{height}")
        score_acc[w.y0, w.x0] += w.score
        score_acc[w.y0, w.x1 + 1] -= w.score
        score_acc[w.y1 + 1, w.x0] -= w.score
        score_acc[w.y1 + 1, w.x1 + 1] += w.score
        count_acc[w.y0, w.x0] += 1
        count_acc[w.y0, w.x1 + 1] -= 1
        count_acc[w.y1 + 1, w.x0] -= 1
        count_acc[w.y1 + 1, w.x1 + 1] += 1

    sums = np.cumsum(np.cumsum(score_acc, axis=0), axis=1)[:height, :width]
    counts = np.cumsum(np.cumsum(count_acc, axis=0), axis=1)[:height, :width]
    values = np.full((height, width), float(uncovered_value))
    covered = counts > 0
    values[covered] = sums[covered] / counts[covered]
    # Guard against rounding drift just outside [0, 1].
    return ObjectnessMap(np.clip(values, 0.0, 1.0))


def _random_windows(rng: np.random.Generator, width: int, height: int, n: int):
    xs = np.sort(rng.integers(0, width, size=(n, 2)), axis=1)
    ys = np.sort(rng.integers(0, height, size=(n, 2)), axis=1)
    return xs, ys


def oracle_scorer(
    mask: LabelMap,
    catalog: ClassCatalog,
    noise_sd: float,
    n_windows: int,
    seed: int,
) -> list[ScoredWindow]:
    """Score seeded random windows by their ground-truth object-pixel fraction.

    A desk-scale stand-in for a pretrained objectness model: the score is the
    fraction of window pixels labeled with an object class, plus Gaussian
    noise, clipped to [0, 1].
    """
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    rng = np.random.default_rng(seed)
    height, width = mask.height, mask.width
    is_obj = np.isin(mask.labels, sorted(catalog.object_classes)).astype(np.float64)
    # Summed-area table with a zero top row/left column for O(1) box sums.
    sat = np.zeros((height + 1, width + 1))
    sat[1:, 1:] = np.cumsum(np.cumsum(is_obj, axis=0), axis=1)

    xs, ys = _random_windows(rng, width, height, n_windows)
    out = []
    for (x0, x1), (y0, y1) in zip(xs, ys):
        area = (x1 - x0 + 1) * (y1 - y0 + 1)
        obj = sat[y1 + 1, x1 + 1] - sat[y0, x1 + 1] - sat[y1 + 1, x0] + sat[y0, x0]
        score = obj / area
        if noise_sd > 0:
            score += rng.normal(0.0, noise_sd)
        out.append(ScoredWindow(int(x0), int(y0), int(x1), int(y1), float(np.clip(score, 0.0, 1.0))))
    return out


def heuristic_scorer(image: np.ndarray, n_windows: int, seed: int) -> list[ScoredWindow]:
    """Score seeded random windows by color contrast against a surrounding ring.

    Needs no ground truth: a window whose mean color differs strongly from
    the mean color of the ring around it is likely to frame an object. The
    contrast is the Euclidean RGB distance normalized by sqrt(3), so scores
    lie in [0, 1] and a uniform image scores 0 everywhere.
    """
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    img = np.asarray(image, dtype=np.float64)
    height, width = img.shape[:2]
    rng = np.random.default_rng(seed)
    sat = np.zeros((height + 1, width + 1, 3))
    sat[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)

    def box_mean(x0, y0, x1, y1):
        area = (x1 - x0 + 1) * (y1 - y0 + 1)
        s = sat[y1 + 1, x1 + 1] - sat[y0, x1 + 1] - sat[y1 + 1, x0] + sat[y0, x0]
        return s / area, area

    xs, ys = _random_windows(rng, width, height, n_windows)
    out = []
    for (x0, x1), (y0, y1) in zip(xs, ys):
        out.append(score_window_contrast(box_mean, int(x0), int(y0), int(x1), int(y1), width, height))
    return out


def score_window_contrast(box_mean, x0, y0, x1, y1, width, height, margin: int = 2) -> ScoredWindow:
    inner_mean, inner_area = box_mean(x0, y0, x1, y1)
    ex0, ey0 = max(0, x0 - margin), max(0, y0 - margin)
    ex1, ey1 = min(width - 1, x1 + margin), min(height - 1, y1 + margin)
    outer_sum, outer_area = box_mean(ex0, ey0, ex1, ey1)
    outer_sum = outer_sum * outer_area
    ring_area = outer_area - inner_area
    if ring_area <= 0:
        contrast = 0.0
    else:
        ring_mean = (outer_sum - inner_mean * inner_area) / ring_area
        contrast = float(np.linalg.norm(inner_mean - ring_mean)) / math.sqrt(3.0)
    return ScoredWindow(x0, y0, x1, y1, min(1.0, max(0.0, contrast)))


def windows_to_jsonl(windows: list[ScoredWindow]) -> str:
    """One JSON object per line: {"box":[x0,y0,x1,y1],"score":s}."""
    import json

    lines = [
        json.dumps({"box": [w.x0, w.y0, w.x1, w.y1], "score": w.score}) for w in windows
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def windows_from_jsonl(text: str) -> list[ScoredWindow]:
    import json

    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        x0, y0, x1, y1 = obj["box"]
        out.append(ScoredWindow(int(x0), int(y0), int(x1), int(y1), float(obj["score"])))
    return out
