"""Feature-matching evaluation of raw frames and common representations.

For each consecutive frame pair the two inputs are mapped by the selected
transform, then run through detect -> describe -> match -> RANSAC, and the
pair's mean descriptor distance, match count and reprojection error are
averaged into an :class:`EvalReport`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import features
from .generator import GeneratorWeights, infer
from .homography import (
    DEFAULT_INLIER_PX,
    DEFAULT_ITERATIONS,
    HomographyError,
    InsufficientCorrespondences,
    estimate_homography_ransac,
    reprojection_error,
)

MODES = ("raw", "image_cr", "depth_cr", "cross_cr")
CSV_HEADER = (
    "condition",
    "avg_distance_raw",
    "avg_distance_normalized",
    "avg_matches",
    "avg_reprojection_px",
    "pairs",
    "dropped",
)


@dataclass
class EvalReport:
    condition: str
    avg_distance_raw: float
    avg_matches: float
    avg_reprojection_error: float
    pairs_evaluated: int
    dropped: int = 0
    avg_distance_normalized: float | None = None

    def normalized_by(self, baseline: "EvalReport") -> "EvalReport":
        d0 = baseline.avg_distance_raw
        norm = self.avg_distance_raw / d0 if d0 and math.isfinite(d0) else None
        return EvalReport(
            self.condition,
            self.avg_distance_raw,
            self.avg_matches,
            self.avg_reprojection_error,
            self.pairs_evaluated,
            self.dropped,
            norm,
        )

    def row(self) -> list[str]:
        def fmt(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))

        return [
            self.condition,
            fmt(self.avg_distance_raw),
            fmt(self.avg_distance_normalized),
            fmt(self.avg_matches),
            fmt(self.avg_reprojection_error),
            str(self.pairs_evaluated),
            str(self.dropped),
        ]


def reports_to_csv(reports: list[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def write_reports(path, reports: list[EvalReport]) -> None:
    Path(path).write_text(reports_to_csv(reports))


def read_reports(path) -> list[EvalReport]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:

        def num(key):
            return float(r[key]) if r[key] != "" else float("nan")

        norm = r["avg_distance_normalized"]
        out.append(
            EvalReport(
                condition=r["condition"],
                avg_distance_raw=num("avg_distance_raw"),
                avg_matches=num("avg_matches"),
                avg_reprojection_error=num("avg_reprojection_px"),
                pairs_evaluated=int(r["pairs"]),
                dropped=int(r["dropped"]),
                avg_distance_normalized=float(norm) if norm != "" else None,
            )
        )
    return out


@dataclass
class PairResult:
    avg_distance: float
    matches: int
    reprojection_error: float | None


def match_pair(
    img_a: np.ndarray,
    img_b: np.ndarray,
    max_keypoints: int = 500,
    max_distance: int = features.MAX_MATCH_DISTANCE,
    iterations: int = DEFAULT_ITERATIONS,
    inlier_px: float = DEFAULT_INLIER_PX,
    seed: int = 0,
) -> PairResult:
    """Run the full matching chain on two images.

    ``reprojection_error`` is None when no homography could be estimated.
    """
    ka = features.detect_keypoints(img_a, max_keypoints)
    kb = features.detect_keypoints(img_b, max_keypoints)
    da = features.describe_all(img_a, ka)
    db = features.describe_all(img_b, kb)
    ms = features.match(da, db, max_distance)
    dist = float(np.mean([m.distance for m in ms])) if ms else float("nan")
    try:
        h, inliers = estimate_homography_ransac(ms, ka, kb, iterations, inlier_px, seed)
    except (InsufficientCorrespondences, HomographyError):
        return PairResult(dist, len(ms), None)
    return PairResult(dist, len(ms), reprojection_error(h, inliers, ka, kb))


def _transform(frames, mode, weights_image, weights_depth):
    if mode == "raw":
        return lambda f: f.gray, lambda f: f.gray
    if mode in ("image_cr", "cross_cr") and weights_image is None:
        raise ValueError(f"mode {mode!r} needs image generator weights")
    if mode in ("depth_cr", "cross_cr") and weights_depth is None:
        raise ValueError(f"mode {mode!r} needs depth generator weights")
    img_cr = lambda f: infer(weights_image, f.gray)  # noqa: E731
    dep_cr = lambda f: infer(weights_depth, f.depth_gray)  # noqa: E731
    if mode == "image_cr":
        return img_cr, img_cr
    if mode == "depth_cr":
        return dep_cr, dep_cr
    if mode == "cross_cr":
        return img_cr, dep_cr
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def evaluate_pairs(
    frames: list,
    mode: str = "raw",
    weights_image: GeneratorWeights | None = None,
    weights_depth: GeneratorWeights | None = None,
    n_pairs: int = 100,
    step: int = 1,
    baseline: EvalReport | None = None,
    condition: str | None = None,
    seed: int = 0,
    **match_kwargs,
) -> EvalReport:
    """Evaluate frame ``t`` against frame ``t + step`` for the first ``n_pairs`` t.

    ``step=0`` matches each frame against itself. Pairs where no homography
    can be fitted are counted in ``dropped`` and left out of every average.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if len(frames) < n_pairs + step:
        raise ValueError(f"need {n_pairs + step} frames for {n_pairs} pairs at step {step}, got {len(frames)}")
    fa, fb = _transform(frames, mode, weights_image, weights_depth)
    results = []
    dropped = 0
    for t in range(n_pairs):
        r = match_pair(fa(frames[t]), fb(frames[t + step]), seed=seed + t, **match_kwargs)
        if r.reprojection_error is None:
            dropped += 1
        else:
            results.append(r)
    if results:
        dist = float(np.mean([r.avg_distance for r in results]))
        nm = float(np.mean([r.matches for r in results]))
        err = float(np.mean([r.reprojection_error for r in results]))
    else:
        dist = nm = err = float("nan")
    report = EvalReport(condition or mode, dist, nm, err, len(results), dropped)
    return report.normalized_by(baseline) if baseline is not None else report
