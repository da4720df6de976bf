"""Dense-prediction value types: score maps, softmax, label maps, class catalog.

Pixels are indexed row-major: pixel i = y * W + x. All value types are
immutable after construction (arrays are copied and marked read-only), so
they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

# Label value for pixels excluded from both loss and evaluation
# (object-boundary "difficult" regions). Matches the common 8-bit
# mask-image convention.
IGNORE = 255


def _frozen(arr: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ClassCatalog:
    """Total class vocabulary split into object and background classes."""

    num_classes: int
    object_classes: frozenset[int]
    background_classes: frozenset[int]

    def __post_init__(self):
        if self.num_classes <= 0:
            raise ValueError("num_classes must be positive")
        object.__setattr__(self, "object_classes", frozenset(self.object_classes))
        object.__setattr__(self, "background_classes", frozenset(self.background_classes))
        if not self.object_classes or not self.background_classes:
            raise ValueError("object and background class sets must both be non-empty")
        if self.object_classes & self.background_classes:
            raise ValueError("object and background class sets must be disjoint")
        if self.object_classes | self.background_classes != set(range(self.num_classes)):
            raise ValueError("object and background classes must partition 0..N-1")

    @staticmethod
    def with_background_zero(num_classes: int) -> "ClassCatalog":
        """Catalog with class 0 as the single background class."""
        return ClassCatalog(
            num_classes=num_classes,
            object_classes=frozenset(range(1, num_classes)),
            background_classes=frozenset({0}),
        )


@dataclass(frozen=True)
class ScoreMap:
    """Raw per-pixel, per-class scores, shape (H, W, N)."""

    scores: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"scores must be (H, W, N), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            y, x, c = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(f"non-finite score at pixel ({x},{y}), class {c}")
        object.__setattr__(self, "scores", _frozen(arr))

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[2]

    def flat(self) -> np.ndarray:
        """View as (H*W, N) with pixel index i = y*W + x."""
        return self.scores.reshape(-1, self.num_classes)


@dataclass(frozen=True)
class SoftmaxMap:
    """Per-pixel class probabilities, shape (H, W, N); rows sum to 1."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"probs must be (H, W, N), got shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = arr.sum(axis=2)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError("per-pixel probabilities must sum to 1 within 1e-9")
        object.__setattr__(self, "probs", _frozen(arr))

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[2]

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1, self.num_classes)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids, shape (H, W); IGNORE marks excluded pixels."""

    labels: np.ndarray
    num_classes: int = field(default=0)  # 0 = unchecked upper bound

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"labels must be (H, W), got shape {arr.shape}")
        if arr.min() < 0:
            raise ValueError("labels must be non-negative")
        if self.num_classes:
            bad = (arr != IGNORE) & (arr >= self.num_classes)
            if bad.any():
                raise ValueError(f"label >= num_classes ({self.num_classes}) at {np.argwhere(bad)[0]}")
        object.__setattr__(self, "labels", _frozen(arr, dtype=np.int64))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)

    def present_classes(self) -> set[int]:
        """Classes with at least one non-IGNORE pixel."""
        vals = np.unique(self.labels)
        return {int(v) for v in vals if v != IGNORE}


def softmax(scores: ScoreMap) -> SoftmaxMap:
    """Per-pixel softmax over classes, computed with max-subtraction."""
    s = scores.scores
    shifted = s - s.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=2, keepdims=True)
    return SoftmaxMap(probs)


def predict(probs: SoftmaxMap) -> LabelMap:
    """Per-pixel argmax class; ties broken by lowest class id."""
    # np.argmax returns the first maximal index, which is the lowest class id.
    labels = np.argmax(probs.probs, axis=2)
    return LabelMap(labels, num_classes=probs.num_classes)


def save_mask_png(mask: LabelMap, path) -> None:
    """Write a label map as an 8-bit single-channel PNG (255 = IGNORE)."""
    arr = mask.labels
    if (arr[arr != IGNORE] > 254).any():
        raise ValueError("class ids above 254 cannot be stored in an 8-bit mask")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def load_mask_png(path, num_classes: int = 0) -> LabelMap:
    arr = np.asarray(Image.open(path).convert("L"), dtype=np.int64)
    return LabelMap(arr, num_classes=num_classes)


def save_image_png(image: np.ndarray, path) -> None:
    """Write an (H, W, 3) float image in [0, 1] as an 8-bit RGB PNG."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path, format="PNG")


def load_image_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    return arr / 255.0
