"""Homography estimation: normalized DLT inside a batched RANSAC loop."""

from __future__ import annotations

import numpy as np

DEFAULT_ITERATIONS = 2000
DEFAULT_INLIER_PX = 3.0
COLLINEAR_TOL = 1e-6


class InsufficientCorrespondences(ValueError):
    pass


class HomographyError(RuntimeError):
    """Raised when no non-degenerate model can be found."""


def hartley_normalize(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity T moving the centroid to 0 and the mean distance to sqrt(2).

    Works on (N, 2) or batched (S, N, 2) input.
    """
    pts = np.asarray(pts, dtype=np.float64)
    c = pts.mean(axis=-2, keepdims=True)
    d = np.sqrt(((pts - c) ** 2).sum(axis=-1)).mean(axis=-1)
    s = np.sqrt(2.0) / np.maximum(d, 1e-300)
    shape = pts.shape[:-2] + (3, 3)
    t = np.zeros(shape)
    t[..., 0, 0] = s
    t[..., 1, 1] = s
    t[..., 0, 2] = -s * c[..., 0, 0]
    t[..., 1, 2] = -s * c[..., 0, 1]
    t[..., 2, 2] = 1.0
    return (pts - c) * s[..., None, None], t


def _design_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, y = a[..., 0], a[..., 1]
    u, v = b[..., 0], b[..., 1]
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    r1 = np.stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u], axis=-1)
    r2 = np.stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v], axis=-1)
    rows = np.stack([r1, r2], axis=-2)  # (..., N, 2, 9)
    return rows.reshape(rows.shape[:-3] + (-1, 9))


def dlt(pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
    """Normalized DLT; least squares when more than 4 points. Supports batching.

    Returned matrices are scaled so h33 = 1 (NaN where h33 vanishes).
    """
    na, ta = hartley_normalize(pts_a)
    nb, tb = hartley_normalize(pts_b)
    a = _design_matrix(na, nb)
    _, _, vt = np.linalg.svd(a)
    hn = vt[..., -1, :].reshape(vt.shape[:-2] + (3, 3))
    h = np.linalg.inv(tb) @ hn @ ta
    h33 = h[..., 2:3, 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(h33) > 1e-12, h / h33, np.nan)


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    q = pts @ h[..., :2, :2].swapaxes(-1, -2) + h[..., None, :2, 2]
    w = pts @ h[..., 2:3, :2].swapaxes(-1, -2) + h[..., None, 2:3, 2]
    # points mapped to infinity by degenerate samples become inf and never count as inliers
    with np.errstate(divide="ignore", invalid="ignore"):
        return q / w


def symmetric_transfer(h: np.ndarray, pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
    """Per-point 0.5 * (|H a - b| + |H^-1 b - a|) in pixels."""
    hinv = np.linalg.inv(h)
    with np.errstate(invalid="ignore", over="ignore"):
        fwd = np.linalg.norm(apply_homography(h, pts_a) - pts_b, axis=-1)
        bwd = np.linalg.norm(apply_homography(hinv, pts_b) - pts_a, axis=-1)
        return 0.5 * (fwd + bwd)


def _collinear_any3(pts: np.ndarray) -> np.ndarray:
    """pts (S, 4, 2) -> bool (S,), True when some 3 of the 4 points are collinear."""
    n, _ = hartley_normalize(pts)
    bad = np.zeros(pts.shape[0], dtype=bool)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        e1 = n[:, j] - n[:, i]
        e2 = n[:, k] - n[:, i]
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        bad |= np.abs(cross) < COLLINEAR_TOL
    return bad


def ransac_homography(
    pts_a: np.ndarray,
    pts_b: np.ndarray,
    iterations: int = DEFAULT_ITERATIONS,
    inlier_px: float = DEFAULT_INLIER_PX,
    seed: int = 0,
    return_minimal: bool = False,
):
    """Fit H with ``H @ a ~ b``. Returns (H, inlier mask).

    With ``return_minimal`` the best minimal-sample model and its mask are
    appended to the result.
    """
    pts_a = np.asarray(pts_a, dtype=np.float64)
    pts_b = np.asarray(pts_b, dtype=np.float64)
    n = len(pts_a)
    if n < 4 or len(pts_b) != n:
        raise InsufficientCorrespondences(f"insufficient correspondences: {n} (need >= 4)")
    rng = np.random.default_rng(seed)
    samples = np.argsort(rng.random((iterations, n)), axis=1)[:, :4]
    sa, sb = pts_a[samples], pts_b[samples]
    ok = ~(_collinear_any3(sa) | _collinear_any3(sb))
    if not ok.any():
        raise HomographyError("every sample was degenerate")
    hs = dlt(sa[ok], sb[ok])
    finite = np.all(np.isfinite(hs), axis=(1, 2))
    finite &= np.abs(np.linalg.det(np.where(finite[:, None, None], hs, np.eye(3)))) > 1e-12
    hs = hs[finite]
    if not len(hs):
        raise HomographyError("no invertible minimal model")
    err = symmetric_transfer(hs, pts_a[None], pts_b[None])
    inl = err < inlier_px
    counts = inl.sum(axis=1)
    best = int(np.argmax(counts))
    h_min, mask_min = hs[best], inl[best]

    h, mask = h_min, mask_min
    if mask_min.sum() >= 4:
        h_fit = dlt(pts_a[mask_min], pts_b[mask_min])
        if np.all(np.isfinite(h_fit)) and abs(np.linalg.det(h_fit)) > 1e-12:
            h = h_fit
            mask = symmetric_transfer(h, pts_a, pts_b) < inlier_px
    if return_minimal:
        return h, mask, h_min, mask_min
    return h, mask


def estimate_homography_ransac(matches, kps_a, kps_b, iterations=DEFAULT_ITERATIONS, inlier_px=DEFAULT_INLIER_PX, seed=0):
    """RANSAC on keypoint matches; returns (H, list of inlier matches)."""
    if len(matches) < 4:
        raise InsufficientCorrespondences(f"insufficient correspondences: {len(matches)} (need >= 4)")
    pa, pb = match_points(matches, kps_a, kps_b)
    h, mask = ransac_homography(pa, pb, iterations, inlier_px, seed)
    return h, [m for m, keep in zip(matches, mask) if keep]


def match_points(matches, kps_a, kps_b) -> tuple[np.ndarray, np.ndarray]:
    pa = np.array([(kps_a[m.index_a].x, kps_a[m.index_a].y) for m in matches], dtype=np.float64).reshape(-1, 2)
    pb = np.array([(kps_b[m.index_b].x, kps_b[m.index_b].y) for m in matches], dtype=np.float64).reshape(-1, 2)
    return pa, pb


def reprojection_error(h: np.ndarray, inliers, kps_a, kps_b) -> float | None:
    """Mean symmetric transfer error over inlier matches; None if there are none."""
    if len(inliers) == 0:
        return None
    pa, pb = match_points(inliers, kps_a, kps_b)
    return float(symmetric_transfer(h, pa, pb).mean())
