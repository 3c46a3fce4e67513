"""Canny edge detector with fixed, reproducible stage conventions.

Stages: separable Gaussian blur (edge-clamped), 3x3 Sobel scaled by 1/8,
gradient magnitude, 4-bin direction quantization, non-maximum suppression
and 8-connected hysteresis. Sums are accumulated in a mirror-symmetric
order so an image and its left-right mirror give mirrored results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

TAN_22_5 = math.sqrt(2.0) - 1.0

# (minus, plus) neighbour offsets (dy, dx) for each direction bin
NMS_OFFSETS = {
    0: ((0, -1), (0, 1)),  # gradient ~horizontal
    1: ((-1, -1), (1, 1)),  # gradient along +x+y
    2: ((-1, 0), (1, 0)),  # gradient ~vertical
    3: ((-1, 1), (1, -1)),  # gradient along +x-y
}


@dataclass(frozen=True)
class CannyConfig:
    gaussian_sigma: float = 1.4
    low_threshold: float = 0.05
    high_threshold: float = 0.15

    def __post_init__(self) -> None:
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")
        if not 0 < self.low_threshold < self.high_threshold:
            raise ValueError("need 0 < low_threshold < high_threshold")

    @property
    def radius(self) -> int:
        return int(math.ceil(3.0 * self.gaussian_sigma))


def gaussian_weights(sigma: float) -> np.ndarray:
    """Half kernel ``w[0..r]`` normalized so ``w0 + 2*sum(w[1:]) == 1``."""
    r = int(math.ceil(3.0 * sigma))
    w = [math.exp(-(k * k) / (2.0 * sigma * sigma)) for k in range(r + 1)]
    total = w[0]
    for k in range(1, r + 1):
        total += 2.0 * w[k]
    return np.array([v / total for v in w])


def _blur_axis(img: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    r = len(w) - 1
    n = img.shape[axis]
    idx = np.arange(n)
    out = w[0] * img
    for k in range(1, r + 1):
        lo = np.take(img, np.clip(idx - k, 0, n - 1), axis=axis)
        hi = np.take(img, np.clip(idx + k, 0, n - 1), axis=axis)
        out = out + w[k] * (lo + hi)
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    w = gaussian_weights(sigma)
    return _blur_axis(_blur_axis(np.asarray(img, dtype=np.float64), w, 1), w, 0)


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edge-clamped Sobel derivatives scaled by 1/8 (unit slope -> 1)."""
    p = np.pad(img, 1, mode="edge")
    h, w = img.shape

    def s(dy, dx):
        return p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    right = (s(-1, 1) + s(1, 1)) + 2.0 * s(0, 1)
    left = (s(-1, -1) + s(1, -1)) + 2.0 * s(0, -1)
    down = (s(1, -1) + s(1, 1)) + 2.0 * s(1, 0)
    up = (s(-1, -1) + s(-1, 1)) + 2.0 * s(-1, 0)
    return (right - left) * 0.125, (down - up) * 0.125


def direction_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    ax = np.abs(gx)
    ay = np.abs(gy)
    bins = np.where(gx * gy > 0, 1, 3)
    bins = np.where(ax <= TAN_22_5 * ay, 2, bins)
    bins = np.where(ay <= TAN_22_5 * ax, 0, bins)
    return bins


def non_max_suppression(mag: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """Keep pixels with ``mag >= minus`` and ``mag > plus`` neighbour.

    The asymmetric tie rule thins plateaus of equal magnitude to one pixel.
    Neighbours outside the image count as 0.
    """
    h, w = mag.shape
    p = np.pad(mag, 1, mode="constant")
    keep = np.zeros(mag.shape, dtype=bool)
    for b, ((my, mx), (py, px)) in NMS_OFFSETS.items():
        minus = p[1 + my : 1 + my + h, 1 + mx : 1 + mx + w]
        plus = p[1 + py : 1 + py + h, 1 + px : 1 + px + w]
        keep |= (bins == b) & (mag >= minus) & (mag > plus)
    return keep


def hysteresis(strong: np.ndarray, weak: np.ndarray) -> np.ndarray:
    """Weak pixels survive iff 8-connected (through weak pixels) to a strong one."""
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    hit = np.unique(labels[strong & weak])
    hit = hit[hit > 0]
    return np.isin(labels, hit)


def canny(img: np.ndarray, cfg: CannyConfig | None = None) -> np.ndarray:
    """Binary edge map (float array of 0.0 / 1.0) of a [0, 1] gray image."""
    cfg = cfg or CannyConfig()
    img = np.asarray(img, dtype=np.float64)
    blurred = gaussian_blur(img, cfg.gaussian_sigma)
    gx, gy = sobel(blurred)
    mag = np.sqrt(gx * gx + gy * gy)
    thin = non_max_suppression(mag, direction_bins(gx, gy))
    weak = thin & (mag >= cfg.low_threshold)
    strong = thin & (mag >= cfg.high_threshold)
    return hysteresis(strong, weak).astype(np.float64)
