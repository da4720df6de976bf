"""Desk-scale segmentation network and its SGD training loop.

Architecture: a k x k convolution (stride s, zero padding) over RGB input,
ReLU, a 1x1 convolution down to one channel per class, then bilinear
upsampling back to the input resolution. Small enough to train with plain
numpy, big enough to separate textured synthetic scenes.

Forward, backward and the optimizer are hand-derived; gradients are exact
(ReLU subgradient at 0 is 0, upsampling backward is the transpose of the
forward interpolation matrix).
"""

from __future__ import annotations

import enum
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import ClassCatalog, ScoreMap
from .losses import combined_loss
from .objectness import ObjectnessMap
from .supervision import SupervisionKind, SupervisionRecord, WeightScheme

CHECKPOINT_MAGIC = b"PSGM"
CHECKPOINT_VERSION = 1


class InitMode(enum.Enum):
    ZERO_CLASSIFIER = "zero_classifier"
    RANDOM = "random"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters."""

    num_classes: int
    features: int = 16
    kernel: int = 5
    stride: int = 4

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd and >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.features < 1 or self.num_classes < 1:
            raise ValueError("features and num_classes must be >= 1")


@dataclass(frozen=True)
class ModelParams:
    """All trainable arrays plus the architecture they belong to."""

    config: ModelConfig
    conv1_w: np.ndarray  # (F, 3, k, k)
    conv1_b: np.ndarray  # (F,)
    conv2_w: np.ndarray  # (N, F)
    conv2_b: np.ndarray  # (N,)

    def __post_init__(self):
        cfg = self.config
        expect = {
            "conv1_w": (cfg.features, 3, cfg.kernel, cfg.kernel),
            "conv1_b": (cfg.features,),
            "conv2_w": (cfg.num_classes, cfg.features),
            "conv2_b": (cfg.num_classes,),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "conv1_w": self.conv1_w,
            "conv1_b": self.conv1_b,
            "conv2_w": self.conv2_w,
            "conv2_b": self.conv2_b,
        }


@dataclass(frozen=True)
class ParamGrads:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "conv1_w": self.conv1_w,
            "conv1_b": self.conv1_b,
            "conv2_w": self.conv2_w,
            "conv2_b": self.conv2_b,
        }

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads(**{k: factor * v for k, v in self.arrays().items()})

    def __add__(self, other: "ParamGrads") -> "ParamGrads":
        mine, theirs = self.arrays(), other.arrays()
        return ParamGrads(**{k: mine[k] + theirs[k] for k in mine})


@dataclass(frozen=True)
class TrainConfig:
    """SGD recipe. The published recipe (lr 1e-5, doubled for biases,
    minibatch 20, momentum 0.9, weight decay 5e-4) suits a large pre-trained
    backbone; the desk-scale default learning rate is higher because the
    network here is tiny and randomly initialized.
    """

    learning_rate: float = 1e-2
    bias_lr_multiplier: float = 2.0
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 20
    iterations: int = 300
    seed: int = 0
    lambda_obj: float = 0.0
    weight_scheme: WeightScheme | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.bias_lr_multiplier <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or self.lambda_obj < 0:
            raise ValueError("weight_decay and lambda_obj must be >= 0")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be >= 1 and iterations >= 0")


PAPER_RECIPE = TrainConfig(learning_rate=1e-5, iterations=50_000)


# ---------------------------------------------------------------------------
# forward / backward

_patch_index_cache: dict[tuple, np.ndarray] = {}
_upsample_cache: dict[tuple[int, int], np.ndarray] = {}


def _patch_indices(height: int, width: int, kernel: int, stride: int) -> np.ndarray:
    """Flat indices into the zero-padded image gathering k*k*3 patch columns."""
    key = (height, width, kernel, stride)
    cached = _patch_index_cache.get(key)
    if cached is not None:
        return cached
    pad = kernel // 2
    ph, pw = height + 2 * pad, width + 2 * pad
    out_h = (ph - kernel) // stride + 1
    out_w = (pw - kernel) // stride + 1
    ys = (np.arange(out_h) * stride)[:, None, None, None]
    xs = (np.arange(out_w) * stride)[None, :, None, None]
    ky = np.arange(kernel)[None, None, :, None]
    kx = np.arange(kernel)[None, None, None, :]
    flat = (ys + ky) * pw + (xs + kx)  # (out_h, out_w, k, k)
    idx = flat.reshape(out_h * out_w, kernel * kernel)
    _patch_index_cache[key] = idx
    return idx


def _upsample_matrix(out_size: int, in_size: int) -> np.ndarray:
    """Bilinear interpolation weights (out_size, in_size), half-pixel centers."""
    key = (out_size, in_size)
    cached = _upsample_cache.get(key)
    if cached is not None:
        return cached
    u = np.zeros((out_size, in_size))
    scale = in_size / out_size
    for o in range(out_size):
        src = (o + 0.5) * scale - 0.5
        src = min(max(src, 0.0), in_size - 1.0)
        i0 = int(np.floor(src))
        f = src - i0
        i1 = min(i0 + 1, in_size - 1)
        u[o, i0] += 1.0 - f
        u[o, i1] += f
    u.flags.writeable = False
    _upsample_cache[key] = u
    return u


def _grid_shape(height: int, width: int, cfg: ModelConfig) -> tuple[int, int]:
    pad = cfg.kernel // 2
    gh = (height + 2 * pad - cfg.kernel) // cfg.stride + 1
    gw = (width + 2 * pad - cfg.kernel) // cfg.stride + 1
    return gh, gw


def _forward_parts(params: ModelParams, image: np.ndarray):
    """Run the network, keeping the intermediates backward needs."""
    cfg = params.config
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got shape {img.shape}")
    height, width = img.shape[:2]
    if height < cfg.kernel or width < cfg.kernel:
        raise ValueError(f"image {width}x{height} smaller than kernel {cfg.kernel}")

    pad = cfg.kernel // 2
    padded = np.zeros((height + 2 * pad, width + 2 * pad, 3))
    padded[pad:pad + height, pad:pad + width] = img
    idx = _patch_indices(height, width, cfg.kernel, cfg.stride)
    # (n_out, k*k, 3) -> (n_out, 3*k*k) matching conv1_w.reshape(F, -1) layout
    patches = padded.reshape(-1, 3)[idx]
    patches = patches.transpose(0, 2, 1).reshape(idx.shape[0], 3 * cfg.kernel * cfg.kernel)

    w1 = params.conv1_w.reshape(cfg.features, -1)
    pre = patches @ w1.T + params.conv1_b  # (n_out, F)
    act = np.maximum(pre, 0.0)
    logits = act @ params.conv2_w.T + params.conv2_b  # (n_out, N)

    gh, gw = _grid_shape(height, width, cfg)
    grid = logits.reshape(gh, gw, cfg.num_classes)
    uy = _upsample_matrix(height, gh)
    ux = _upsample_matrix(width, gw)
    tall = np.tensordot(uy, grid, axes=(1, 0))  # (H, gw, N)
    scores = np.tensordot(tall, ux, axes=([1], [1])).transpose(0, 2, 1)  # (H, W, N)
    return scores, (patches, pre, act, uy, ux, gh, gw)


def forward(params: ModelParams, image: np.ndarray) -> ScoreMap:
    """Dense class scores for an RGB image, same spatial size as the input."""
    scores, _ = _forward_parts(params, image)
    return ScoreMap(scores)


def backward(params: ModelParams, image: np.ndarray, loss_grad: np.ndarray) -> ParamGrads:
    """Exact parameter gradients given d(loss)/d(scores) of shape (H, W, N)."""
    _, parts = _forward_parts(params, image)
    return _backward_from_parts(params, parts, loss_grad)


def _backward_from_parts(params: ModelParams, parts, loss_grad: np.ndarray) -> ParamGrads:
    cfg = params.config
    patches, pre, act, uy, ux, gh, gw = parts
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.shape != (uy.shape[0], ux.shape[0], cfg.num_classes):
        raise ValueError(f"loss gradient shape {g.shape} does not match the score map")

    # Upsampling backward: transpose of the interpolation matrices.
    tall = np.tensordot(uy.T, g, axes=(1, 0))  # (gh, W, N)
    d_grid = np.tensordot(tall, ux, axes=([1], [0]))  # (gh, N, gw)
    d_logits = d_grid.transpose(0, 2, 1).reshape(gh * gw, cfg.num_classes)

    d_conv2_b = d_logits.sum(axis=0)
    d_conv2_w = d_logits.T @ act
    d_act = d_logits @ params.conv2_w
    d_pre = d_act * (pre > 0.0)
    d_conv1_b = d_pre.sum(axis=0)
    d_conv1_w = (d_pre.T @ patches).reshape(cfg.features, 3, cfg.kernel, cfg.kernel)
    return ParamGrads(d_conv1_w, d_conv1_b, d_conv2_w, d_conv2_b)


# ---------------------------------------------------------------------------
# optimizer

@dataclass(frozen=True)
class MomentumState:
    velocity: dict[str, np.ndarray]

    @staticmethod
    def zeros(params: ModelParams) -> "MomentumState":
        return MomentumState({k: np.zeros_like(v) for k, v in params.arrays().items()})


def sgd_step(
    params: ModelParams,
    grads: ParamGrads,
    state: MomentumState,
    cfg: TrainConfig,
) -> tuple[ModelParams, MomentumState]:
    """One SGD update: v <- momentum*v - lr_eff*(g + decay*w); w <- w + v.

    Biases get the learning rate multiplied by bias_lr_multiplier and are
    exempt from weight decay.
    """
    new_arrays = {}
    new_vel = {}
    for name, w in params.arrays().items():
        g = grads.arrays()[name]
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
        is_bias = name.endswith("_b")
        lr = cfg.learning_rate * (cfg.bias_lr_multiplier if is_bias else 1.0)
        decay = 0.0 if is_bias else cfg.weight_decay
        v = cfg.momentum * state.velocity[name] - lr * (g + decay * w)
        new_vel[name] = v
        new_arrays[name] = w + v
    return replace(params, **new_arrays), MomentumState(new_vel)


def init_params(
    cfg: ModelConfig, mode: InitMode, seed: int = 0, init_std: float = 0.1
) -> ModelParams:
    """Seeded Gaussian initialization; ZERO_CLASSIFIER zeroes the final
    1x1 layer so every class starts from identical scores.
    """
    rng = np.random.default_rng(seed)
    conv1_w = rng.normal(0.0, init_std, size=(cfg.features, 3, cfg.kernel, cfg.kernel))
    conv1_b = np.zeros(cfg.features)
    if mode is InitMode.ZERO_CLASSIFIER:
        conv2_w = np.zeros((cfg.num_classes, cfg.features))
    else:
        conv2_w = rng.normal(0.0, init_std, size=(cfg.num_classes, cfg.features))
    conv2_b = np.zeros(cfg.num_classes)
    return ModelParams(cfg, conv1_w, conv1_b, conv2_w, conv2_b)


# ---------------------------------------------------------------------------
# training loop

def train(
    params: ModelParams,
    images: list[np.ndarray],
    records: list[SupervisionRecord],
    cfg: TrainConfig,
    catalog: ClassCatalog,
    priors: list[ObjectnessMap] | None = None,
) -> tuple[ModelParams, list[float]]:
    """Seeded minibatch SGD; returns final parameters and per-iteration loss.

    The per-iteration loss is the mean combined loss over the minibatch.
    Records carrying a full mask are trained without the objectness term
    (the prior is meant to substitute for missing pixel labels); all other
    records use cfg.lambda_obj.
    """
    if len(images) == 0:
        raise ValueError("training dataset is empty")
    if len(images) != len(records):
        raise ValueError("images and supervision records must be parallel lists")
    if cfg.lambda_obj > 0:
        if priors is None or len(priors) != len(images):
            raise ValueError("lambda_obj > 0 requires one objectness prior per image")
        if any(r.mask is not None and r.kind is SupervisionKind.FULL for r in records):
            warnings.warn(
                "objectness weight is ignored for fully-supervised images",
                stacklevel=2,
            )

    rng = np.random.default_rng(cfg.seed)
    n = len(images)
    batch_size = min(cfg.batch_size, n)
    order = rng.permutation(n)
    pos = 0

    history: list[float] = []
    state = MomentumState.zeros(params)
    for _ in range(cfg.iterations):
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        batch = sorted(int(i) for i in order[pos:pos + batch_size])
        pos += batch_size

        total_loss = 0.0
        grad_sum: ParamGrads | None = None
        for i in batch:  # ascending image index: fixed reduction order
            record = records[i]
            use_obj = cfg.lambda_obj > 0 and record.mask is None
            scores, parts = _forward_parts(params, images[i])
            lv = combined_loss(
                ScoreMap(scores),
                record,
                priors[i] if use_obj else None,
                cfg.lambda_obj if use_obj else 0.0,
                catalog,
            )
            total_loss += lv.value
            g = _backward_from_parts(params, parts, lv.grad)
            grad_sum = g if grad_sum is None else grad_sum + g

        mean_grads = grad_sum.scaled(1.0 / len(batch))
        history.append(total_loss / len(batch))
        params, state = sgd_step(params, mean_grads, state, cfg)
    return params, history


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: ModelParams, path) -> None:
    """Versioned binary checkpoint: magic, version, dims, then float32 LE."""
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<5I", CHECKPOINT_VERSION, cfg.num_classes, cfg.features,
                             cfg.kernel, cfg.stride))
        for name in ("conv1_w", "conv1_b", "conv2_w", "conv2_b"):
            arr = params.arrays()[name].astype("<f4")
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        version, num_classes, features, kernel, stride = struct.unpack("<5I", fh.read(20))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        cfg = ModelConfig(num_classes=num_classes, features=features, kernel=kernel, stride=stride)
        shapes = {
            "conv1_w": (features, 3, kernel, kernel),
            "conv1_b": (features,),
            "conv2_w": (num_classes, features),
            "conv2_b": (num_classes,),
        }
        arrays = {}
        for name, shape in shapes.items():
            count = int(np.prod(shape))
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError("checkpoint truncated")
            arrays[name] = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
        extra = fh.read(1)
        if extra:
            raise ValueError("trailing bytes after checkpoint payload")
    return ModelParams(cfg, **arrays)
