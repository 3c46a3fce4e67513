"""Single-octave ORB-style features: FAST-9 corners ranked by Harris
response, intensity-centroid orientation, rotated BRIEF descriptors and
cross-checked Hamming matching."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._brief_pattern import PATTERN

FAST_THRESHOLD = 0.08
FAST_ARC = 9
PATCH_RADIUS = 15
MARGIN = 16
HARRIS_K = 0.04
HARRIS_BLOCK = 7
MAX_MATCH_DISTANCE = 80
DESCRIPTOR_BITS = 256

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)

_PATTERN = np.array(PATTERN, dtype=np.float64)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    orientation: float


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: int


def fast_corners(img: np.ndarray, threshold: float = FAST_THRESHOLD, margin: int = MARGIN) -> np.ndarray:
    """Boolean map of FAST-9 corners; pixels within ``margin`` are never corners."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    out = np.zeros((h, w), dtype=bool)
    if h <= 2 * margin or w <= 2 * margin:
        return out
    centre = img[margin : h - margin, margin : w - margin]
    ring = np.stack(
        [img[margin + dy : h - margin + dy, margin + dx : w - margin + dx] for dx, dy in CIRCLE]
    )
    found = np.zeros(centre.shape, dtype=bool)
    for cmp in (ring > centre + threshold, ring < centre - threshold):
        ext = np.concatenate([cmp, cmp[: FAST_ARC - 1]])
        for start in range(len(CIRCLE)):
            found |= np.all(ext[start : start + FAST_ARC], axis=0)
    out[margin : h - margin, margin : w - margin] = found
    return out


def harris_response(img: np.ndarray, block: int = HARRIS_BLOCK, k: float = HARRIS_K) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    sxx = ndimage.uniform_filter(gx * gx, block, mode="nearest")
    syy = ndimage.uniform_filter(gy * gy, block, mode="nearest")
    sxy = ndimage.uniform_filter(gx * gy, block, mode="nearest")
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _disc_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    inside = xx * xx + yy * yy <= radius * radius
    return xx[inside], yy[inside]


_DISC_X, _DISC_Y = _disc_offsets(PATCH_RADIUS)


def orientation(img: np.ndarray, x: int, y: int) -> float:
    """Angle of the intensity centroid of the radius-15 disc around (x, y)."""
    vals = img[y + _DISC_Y, x + _DISC_X]
    return math.atan2(float(np.dot(_DISC_Y, vals)), float(np.dot(_DISC_X, vals)))


def detect_keypoints(
    img: np.ndarray,
    max_n: int = 500,
    threshold: float = FAST_THRESHOLD,
    margin: int = MARGIN,
) -> list[Keypoint]:
    img = np.asarray(img, dtype=np.float64)
    corners = fast_corners(img, threshold, margin)
    if not corners.any():
        return []
    resp = harris_response(img)
    scored = np.where(corners, resp, -np.inf)
    peak = ndimage.maximum_filter(scored, size=3, mode="constant", cval=-np.inf)
    keep = corners & (scored == peak)
    ys, xs = np.nonzero(keep)
    r = resp[ys, xs]
    order = np.lexsort((xs, ys, -r))[:max_n]
    return [
        Keypoint(float(xs[i]), float(ys[i]), float(r[i]), orientation(img, int(xs[i]), int(ys[i])))
        for i in order
    ]


def smooth_for_brief(img: np.ndarray) -> np.ndarray:
    return ndimage.uniform_filter(np.asarray(img, dtype=np.float64), 5, mode="nearest")


def _rotated_pattern(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    p = _PATTERN
    x1 = np.round(c * p[:, 0] - s * p[:, 1])
    y1 = np.round(s * p[:, 0] + c * p[:, 1])
    x2 = np.round(c * p[:, 2] - s * p[:, 3])
    y2 = np.round(s * p[:, 2] + c * p[:, 3])
    return np.stack([x1, y1, x2, y2], axis=1).astype(np.int64)


def _check_margin(shape, kp: Keypoint, margin: int) -> None:
    h, w = shape
    if not (margin <= kp.x < w - margin and margin <= kp.y < h - margin):
        raise ValueError(f"keypoint ({kp.x}, {kp.y}) is closer than {margin} px to the image border")


def describe(img: np.ndarray, kp: Keypoint, smoothed: np.ndarray | None = None, margin: int = MARGIN) -> np.ndarray:
    """256-bit rotated-BRIEF descriptor as a bool array; bit = I(p1) < I(p2)."""
    img = np.asarray(img, dtype=np.float64)
    _check_margin(img.shape, kp, margin)
    s = smooth_for_brief(img) if smoothed is None else smoothed
    pat = _rotated_pattern(kp.orientation)
    x, y = int(round(kp.x)), int(round(kp.y))
    a = s[y + pat[:, 1], x + pat[:, 0]]
    b = s[y + pat[:, 3], x + pat[:, 2]]
    return a < b


def describe_all(img: np.ndarray, kps: list[Keypoint]) -> np.ndarray:
    s = smooth_for_brief(img)
    if not kps:
        return np.zeros((0, DESCRIPTOR_BITS), dtype=bool)
    return np.stack([describe(img, kp, smoothed=s) for kp in kps])


def hamming_matrix(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    pa = np.packbits(np.asarray(da, dtype=bool), axis=1)
    pb = np.packbits(np.asarray(db, dtype=bool), axis=1)
    x = np.bitwise_xor(pa[:, None, :], pb[None, :, :])
    return np.unpackbits(x, axis=2).sum(axis=2, dtype=np.int64)


def match(da: np.ndarray, db: np.ndarray, max_distance: int = MAX_MATCH_DISTANCE) -> list[Match]:
    """Mutual nearest neighbours by Hamming distance, at most ``max_distance`` bits apart."""
    if len(da) == 0 or len(db) == 0:
        return []
    d = hamming_matrix(da, db)
    best_b = d.argmin(axis=1)
    best_a = d.argmin(axis=0)
    out = []
    for i, j in enumerate(best_b):
        if best_a[j] == i and d[i, j] <= max_distance:
            out.append(Match(i, int(j), int(d[i, j])))
    return out
