"""Rasters, LiDAR projection, preprocessing and Siamese pair sampling.

Gray images are float arrays shaped ``(H, W)`` with values in [0, 1].
Depth images hold metres, with 0 meaning "no return".
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_MAX_RANGE = 60.0


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def default(cls, width: int, height: int) -> "CameraIntrinsics":
        # 90 degree horizontal field of view, square pixels
        f = width / 2.0
        return cls(f, f, width / 2.0, height / 2.0, width, height)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FramePair:
    index: int
    gray: np.ndarray
    depth_gray: np.ndarray
    depth: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.gray.shape != self.depth_gray.shape:
            raise ValueError(f"gray {self.gray.shape} and depth {self.depth_gray.shape} differ in size")


@dataclass(frozen=True)
class SamplerConfig:
    p_similar: float = 0.5
    window_k: int = 3
    seed: int = 0
    # "dissimilarity": 0 for identical images; "similarity": 1 - that
    score_polarity: str = "dissimilarity"

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_similar <= 1.0:
            raise ValueError("p_similar must lie in [0, 1]")
        if self.window_k < 1:
            raise ValueError("window_k must be >= 1")
        if self.score_polarity not in ("dissimilarity", "similarity"):
            raise ValueError(f"unknown score polarity {self.score_polarity!r}")


# --- projection and preprocessing --------------------------------------------


def project_point_cloud(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Z-buffered pinhole projection of an (N, 3) cloud into a depth image.

    Pixel ``(u, v)`` is the nearest integer to ``(fx*x/z + cx, fy*y/z + cy)``.
    Points behind the camera or outside the image are dropped.
    """
    depth = np.zeros((intr.height, intr.width), dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.size == 0:
        return depth
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite coordinates")
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    front = z > 0
    x, y, z = x[front], y[front], z[front]
    u = np.floor(intr.fx * x / z + intr.cx + 0.5).astype(np.int64)
    v = np.floor(intr.fy * y / z + intr.cy + 0.5).astype(np.int64)
    inside = (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    u, v, z = u[inside], v[inside], z[inside]
    # farthest first, so the nearest write per pixel lands last
    order = np.argsort(-z, kind="stable")
    depth[v[order], u[order]] = z[order]
    return depth


def normalize_depth(depth: np.ndarray, max_range: float = DEFAULT_MAX_RANGE) -> np.ndarray:
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    return np.clip(np.asarray(depth, dtype=np.float64) / max_range, 0.0, 1.0)


def to_grayscale(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    if not (r.shape == g.shape == b.shape):
        raise ValueError("colour channels differ in shape")
    wr, wg, wb = LUMA_WEIGHTS
    return wr * r + wg * g + wb * b


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment and edge clamping."""
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = coords(height, h)
    x0, x1, fx = coords(width, w)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def chebyshev_score(a: np.ndarray, b: np.ndarray, polarity: str = "dissimilarity") -> float:
    """L-infinity distance between two [0, 1] images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    d = float(np.max(np.abs(a - b))) if a.size else 0.0
    if polarity == "similarity":
        return 1.0 - d
    if polarity != "dissimilarity":
        raise ValueError(f"unknown score polarity {polarity!r}")
    return d


# --- Siamese sampling ---------------------------------------------------------


class SiameseSampler:
    """Draws (frame1, frame2, score) triples.

    With probability ``p_similar`` frame2 is within ``window_k`` frames of
    frame1 (never frame1 itself), otherwise strictly further away.
    """

    def __init__(self, dataset: list[FramePair], cfg: SamplerConfig, rng: np.random.Generator | None = None):
        if len(dataset) <= 2 * cfg.window_k:
            raise ValueError(
                f"dataset has {len(dataset)} frames; Siamese sampling needs more than "
                f"2 * window_k = {2 * cfg.window_k}"
            )
        self.dataset = dataset
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def draw_indices(self) -> tuple[int, int, bool]:
        n = len(self.dataset)
        k = self.cfg.window_k
        similar = bool(self.rng.random() < self.cfg.p_similar)
        while True:
            i = int(self.rng.integers(n))
            if similar:
                cands = [j for j in range(max(0, i - k), min(n, i + k + 1)) if j != i]
            else:
                cands = [j for j in range(n) if abs(j - i) > k]
            if cands:
                return i, cands[int(self.rng.integers(len(cands)))], similar

    def sample(self) -> tuple[FramePair, FramePair, float]:
        i, j, _ = self.draw_indices()
        a, b = self.dataset[i], self.dataset[j]
        return a, b, chebyshev_score(a.gray, b.gray, self.cfg.score_polarity)


def sample_siamese_pair(dataset: list[FramePair], cfg: SamplerConfig, rng: np.random.Generator | None = None):
    return SiameseSampler(dataset, cfg, rng).sample()


# --- PGM files and dataset directories ----------------------------------------


def write_pgm(path, data: np.ndarray, maxval: int = 255) -> None:
    """Write a binary P5 PGM; 16-bit samples are big-endian."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if maxval < 256:
        payload = data.astype(np.uint8).tobytes()
    else:
        payload = data.astype(">u2").tobytes()
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(payload)


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return (integer array, maxval) from a binary P5 PGM."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    count = w * h
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return arr.reshape(h, w).astype(np.int64), maxval


def gray_to_u8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_gray_pgm(path, img: np.ndarray) -> None:
    write_pgm(path, gray_to_u8(img), 255)


def read_gray_pgm(path) -> np.ndarray:
    arr, maxval = read_pgm(path)
    return arr.astype(np.float64) / maxval


def write_depth_pgm(path, depth_m: np.ndarray) -> None:
    mm = np.round(np.asarray(depth_m, dtype=np.float64) * 1000.0)
    write_pgm(path, np.clip(mm, 0, 65535).astype(np.uint16), 65535)


def read_depth_pgm(path) -> np.ndarray:
    arr, maxval = read_pgm(path)
    if maxval < 256:
        raise ValueError(f"{path}: depth PGM must be 16-bit")
    return arr.astype(np.float64) / 1000.0


def frame_paths(root, index: int) -> tuple[Path, Path]:
    frames = Path(root) / "frames"
    return frames / f"{index:06d}.gray.pgm", frames / f"{index:06d}.depth.pgm"


@dataclass
class DatasetManifest:
    seed: int
    num_frames: int
    intrinsics: CameraIntrinsics
    max_range: float = DEFAULT_MAX_RANGE
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "num_frames": self.num_frames,
            "intrinsics": self.intrinsics.to_dict(),
            "max_range": self.max_range,
            **self.extra,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        intr = CameraIntrinsics(**doc.pop("intrinsics"))
        return cls(
            seed=doc.pop("seed"),
            num_frames=doc.pop("num_frames"),
            intrinsics=intr,
            max_range=doc.pop("max_range", DEFAULT_MAX_RANGE),
            extra=doc,
        )


def save_dataset(root, frames: list[FramePair], manifest: DatasetManifest) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if frames:
        (root / "frames").mkdir(exist_ok=True)
    for fp in frames:
        gpath, dpath = frame_paths(root, fp.index)
        write_gray_pgm(gpath, fp.gray)
        depth = fp.depth if fp.depth is not None else fp.depth_gray * manifest.max_range
        write_depth_pgm(dpath, depth)
    (root / "manifest.json").write_text(manifest.to_json())


def load_dataset(root) -> tuple[list[FramePair], DatasetManifest]:
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise FileNotFoundError(f"no manifest.json in {root}")
    manifest = DatasetManifest.from_json(mpath.read_text())
    frames = []
    for i in range(manifest.num_frames):
        gpath, dpath = frame_paths(root, i)
        if not (gpath.is_file() and dpath.is_file()):
            raise FileNotFoundError(f"missing frame {i} under {root / 'frames'}")
        gray = read_gray_pgm(gpath)
        depth = read_depth_pgm(dpath)
        frames.append(FramePair(i, gray, normalize_depth(depth, manifest.max_range), depth))
    return frames, manifest


def is_writable_dir(path) -> bool:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError:
        return False
    return os.access(path, os.W_OK)
