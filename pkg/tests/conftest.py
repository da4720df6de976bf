import numpy as np
import pytest

from pointseg.core import ScoreMap


def central_difference(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Independent numerical gradient of a scalar function of an array."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2.0 * h)
        it.iternext()
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Coordinate-wise relative error with a floor against FD noise on
    near-zero entries.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_scores(rng: np.random.Generator, height: int, width: int, n_classes: int,
                  scale: float = 2.0) -> ScoreMap:
    return ScoreMap(rng.normal(0.0, scale, size=(height, width, n_classes)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
