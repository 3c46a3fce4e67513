"""Synthetic driving sequences: a box world seen from a forward-moving camera.

Coordinates follow the camera convention: x right, y down, z forward. The
ground is the plane ``y = camera_height``; boxes are axis-aligned and stand
on it. A pixel ``(u, v)`` looks along ``((u - cx)/fx, (v - cy)/fy, 1)`` in
the camera frame, so the ray parameter at a hit equals the camera-frame
depth ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DEFAULT_MAX_RANGE, CameraIntrinsics, FramePair, normalize_depth, project_point_cloud

SKY_TOP = 0.85
SKY_HORIZON = 0.95
AMBIENT = 0.35
LIGHT_DIR = np.array([0.4, 1.0, 0.6]) / np.linalg.norm([0.4, 1.0, 0.6])  # direction of travel of the light


@dataclass(frozen=True)
class SceneConfig:
    min_boxes: int = 10
    max_boxes: int = 30
    camera_height: float = 1.6
    speed: float = 0.25  # metres per frame
    yaw_noise: float = 0.004  # radians, per-frame random walk step
    road_half_width: float = 2.5
    lidar_row_step: int = 2
    max_range: float = DEFAULT_MAX_RANGE
    supersample: int = 2


@dataclass
class Scene:
    box_min: np.ndarray  # (B, 3)
    box_max: np.ndarray  # (B, 3)
    face_albedo: np.ndarray  # (B, 6) base albedo per face
    face_contrast: np.ndarray  # (B, 6)
    face_period: np.ndarray  # (B, 6) texture cell size in metres
    ground_period: float
    poses: list  # (position (3,), yaw) per frame


def make_scene(rng: np.random.Generator, num_frames: int, cfg: SceneConfig) -> Scene:
    yaw = 0.0
    rate = 0.0
    pos = np.zeros(3)
    poses = []
    for _ in range(num_frames):
        poses.append((pos.copy(), yaw))
        rate = 0.8 * rate + rng.normal(0.0, cfg.yaw_noise)
        yaw = float(np.clip(yaw + rate, -0.08, 0.08))
        pos = pos + cfg.speed * np.array([np.sin(yaw), 0.0, np.cos(yaw)])

    travel = cfg.speed * max(num_frames - 1, 0)
    n = int(rng.integers(cfg.min_boxes, cfg.max_boxes + 1))
    size = np.column_stack(
        [rng.uniform(1.0, 4.0, n), rng.uniform(1.0, 5.0, n), rng.uniform(1.0, 6.0, n)]
    )
    side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    gap = rng.uniform(0.5, 6.0, n)
    near_x = side * (cfg.road_half_width + gap)
    x0 = np.where(side > 0, near_x, near_x - size[:, 0])
    z0 = rng.uniform(4.0, travel + 40.0, n)
    y1 = np.full(n, cfg.camera_height)
    box_min = np.column_stack([x0, y1 - size[:, 1], z0])
    box_max = np.column_stack([x0 + size[:, 0], y1, z0 + size[:, 2]])
    return Scene(
        box_min=box_min,
        box_max=box_max,
        face_albedo=rng.uniform(0.25, 0.85, (n, 6)),
        face_contrast=rng.uniform(0.15, 0.45, (n, 6)),
        face_period=rng.uniform(0.3, 1.2, (n, 6)),
        ground_period=float(rng.uniform(0.8, 1.5)),
        poses=poses,
    )


def _yaw_matrix(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _checker(a: np.ndarray, b: np.ndarray, period) -> np.ndarray:
    return ((np.floor(a / period) + np.floor(b / period)) % 2) * 2.0 - 1.0


def cast_rays(scene: Scene, pose, dirs_cam: np.ndarray, cfg: SceneConfig):
    """Intersect camera-frame rays ``dirs_cam`` (P, 3) with the scene.

    Returns (t, shade, hit) where ``t`` is the ray parameter (camera depth
    for z=1 rays), ``shade`` the Lambertian intensity and ``hit`` marks
    returns within ``max_range``.
    """
    pos, yaw = pose
    rot = _yaw_matrix(yaw)
    dirs = dirs_cam @ rot.T
    p = dirs.shape[0]

    t_best = np.full(p, np.inf)
    normal = np.zeros((p, 3))
    albedo = np.zeros(p)

    # ground plane
    dy = dirs[:, 1]
    ground = dy > 1e-12
    t_g = np.full(p, np.inf)
    t_g[ground] = (cfg.camera_height - pos[1]) / dy[ground]
    gx = pos[0] + np.where(ground, t_g, 0.0) * dirs[:, 0]
    gz = pos[2] + np.where(ground, t_g, 0.0) * dirs[:, 2]
    g_tex = 0.45 + 0.12 * _checker(gx, gz, scene.ground_period)
    lane = (np.abs(gx) < 0.08) & ((np.floor(gz / 3.0) % 2) == 0)
    g_tex = np.where(lane, 0.9, g_tex)
    take = t_g < t_best
    t_best = np.where(take, t_g, t_best)
    normal[take] = (0.0, -1.0, 0.0)
    albedo = np.where(take, g_tex, albedo)

    # boxes: slab test, one box at a time over all rays
    with np.errstate(divide="ignore"):
        inv = 1.0 / dirs
    slope_x = dirs_cam[:, 0] / dirs_cam[:, 2]
    slope_y = dirs_cam[:, 1] / dirs_cam[:, 2]
    for bi, bounds in _visible_boxes(scene, pose, cfg):
        if bounds is None:
            sel = np.arange(p)
        else:
            x0, x1, y0, y1 = bounds
            sel = np.nonzero((slope_x >= x0) & (slope_x <= x1) & (slope_y >= y0) & (slope_y <= y1))[0]
            if not len(sel):
                continue
        d = dirs[sel]
        lo = scene.box_min[bi] - pos
        hi = scene.box_max[bi] - pos
        with np.errstate(invalid="ignore"):
            t0 = lo * inv[sel]
            t1 = hi * inv[sel]
        # rays parallel to a slab: inside -> unbounded, outside -> miss
        par = d == 0.0
        inside = (lo <= 0.0) & (hi >= 0.0)
        t0 = np.where(par, np.where(inside, -np.inf, np.inf), t0)
        t1 = np.where(par, np.where(inside, np.inf, -np.inf), t1)
        tmin = np.minimum(t0, t1)
        tmax = np.maximum(t0, t1)
        ax = tmin.argmax(axis=1)
        t_enter = tmin[np.arange(len(sel)), ax]
        t_exit = tmax.min(axis=1)
        take = (t_enter <= t_exit) & (t_enter > 1e-9) & (t_enter < t_best[sel])
        if not np.any(take):
            continue
        idx = sel[take]
        ax = ax[take]
        te = t_enter[take]
        sgn = -np.sign(dirs[idx, ax])
        face = ax * 2 + (sgn > 0)
        hp = pos + te[:, None] * dirs[idx]
        u_ax = np.where(ax == 0, 2, 0)
        v_ax = np.where(ax == 1, 2, 1)
        su = hp[np.arange(len(idx)), u_ax]
        sv = hp[np.arange(len(idx)), v_ax]
        tex = scene.face_albedo[bi, face] + scene.face_contrast[bi, face] * 0.5 * _checker(
            su, sv, scene.face_period[bi, face]
        )
        n = np.zeros((len(idx), 3))
        n[np.arange(len(idx)), ax] = sgn
        t_best[idx] = te
        normal[idx] = n
        albedo[idx] = tex

    # camera-frame depth equals world ray parameter because dirs_cam has z = 1
    hit = np.isfinite(t_best) & (t_best * dirs_cam[:, 2] <= cfg.max_range)
    lambert = np.clip(normal @ -LIGHT_DIR, 0.0, None)
    shade = np.clip(albedo * (AMBIENT + (1 - AMBIENT) * lambert), 0.0, 1.0)
    return t_best, shade, hit


def _visible_boxes(scene: Scene, pose, cfg: SceneConfig):
    """Yield (box index, slope bounds) for boxes that may be hit.

    Bounds are the (x/z, y/z) extent of the box corners in the camera frame,
    or None when the box straddles the image plane.
    """
    if not len(scene.box_min):
        return
    pos, yaw = pose
    rot = _yaw_matrix(yaw)
    corners = np.stack(
        [np.where(np.array(m, dtype=bool)[None, :], scene.box_max, scene.box_min) for m in np.ndindex(2, 2, 2)],
        axis=1,
    )
    cam = (corners - pos) @ rot  # world -> camera frame
    z = cam[..., 2]
    keep = (z.max(axis=1) > 0) & (z.min(axis=1) < cfg.max_range)
    for bi in np.nonzero(keep)[0]:
        if z[bi].min() <= 1e-6:
            yield bi, None
            continue
        sx = cam[bi, :, 0] / z[bi]
        sy = cam[bi, :, 1] / z[bi]
        pad = 1e-9
        yield bi, (sx.min() - pad, sx.max() + pad, sy.min() - pad, sy.max() + pad)


def pixel_rays(intr: CameraIntrinsics, du: float = 0.0, dv: float = 0.0) -> np.ndarray:
    v, u = np.mgrid[0 : intr.height, 0 : intr.width].astype(np.float64)
    dirs = np.stack(
        [(u + du - intr.cx) / intr.fx, (v + dv - intr.cy) / intr.fy, np.ones_like(u)], axis=-1
    )
    return dirs.reshape(-1, 3)


def _sky(intr: CameraIntrinsics) -> np.ndarray:
    v = np.arange(intr.height, dtype=np.float64)[:, None]
    frac = np.clip(v / max(intr.cy, 1.0), 0.0, 1.0)
    return np.broadcast_to(SKY_TOP + (SKY_HORIZON - SKY_TOP) * frac, (intr.height, intr.width))


def render_frame(scene: Scene, pose, intr: CameraIntrinsics, cfg: SceneConfig):
    """Return (gray, depth, lidar_points) for one pose.

    ``depth`` is the dense camera-frame depth of the pixel-centre rays;
    ``lidar_points`` are the camera-frame surface points on the scan rows.
    """
    h, w = intr.height, intr.width
    centre = pixel_rays(intr)
    t, _, hit = cast_rays(scene, pose, centre, cfg)
    depth = np.where(hit, t * centre[:, 2], 0.0).reshape(h, w)

    s = max(int(cfg.supersample), 1)
    offs = (np.arange(s) + 0.5) / s - 0.5
    sky = _sky(intr)
    gray = np.zeros((h, w))
    for dv in offs:
        for du in offs:
            dirs = pixel_rays(intr, du, dv)
            _, shade, sub_hit = cast_rays(scene, pose, dirs, cfg)
            gray += np.where(sub_hit.reshape(h, w), shade.reshape(h, w), sky)
    gray /= s * s

    rows = np.zeros((h, w), dtype=bool)
    rows[:: max(int(cfg.lidar_row_step), 1)] = True
    keep = hit & rows.reshape(-1)
    points = centre[keep] * t[keep, None]
    return gray, depth, points


def quantize_gray(gray: np.ndarray) -> np.ndarray:
    return np.round(np.clip(gray, 0.0, 1.0) * 255.0) / 255.0


def generate_sequence(
    seed: int,
    num_frames: int,
    intr: CameraIntrinsics,
    cfg: SceneConfig | None = None,
    return_scene: bool = False,
):
    """Render ``num_frames`` consecutive FramePairs of a random box world.

    Gray images are quantized to 8 bits so they survive a PGM round trip.
    The stored depth is the z-buffered projection of the simulated LiDAR
    cloud, which keeps only every ``lidar_row_step``-th image row.
    """
    if num_frames < 0:
        raise ValueError("num_frames must be >= 0")
    cfg = cfg or SceneConfig()
    rng = np.random.default_rng(seed)
    scene = make_scene(rng, num_frames, cfg)
    frames = []
    for i, pose in enumerate(scene.poses):
        gray, _, points = render_frame(scene, pose, intr, cfg)
        depth = project_point_cloud(points, intr)
        frames.append(FramePair(i, quantize_gray(gray), normalize_depth(depth, cfg.max_range), depth))
    if return_scene:
        return frames, scene
    return frames
