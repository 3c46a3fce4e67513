import numpy as np
import pytest

from crbridge.data import CameraIntrinsics, chebyshev_score, project_point_cloud
from crbridge.synth import Scene, SceneConfig, generate_sequence, make_scene, render_frame

INTR = CameraIntrinsics.default(64, 32)


@pytest.fixture(scope="module")
def sequence():
    return generate_sequence(11, 6, INTR)


def test_sequence_shapes_and_ranges(sequence):
    assert len(sequence) == 6
    for i, f in enumerate(sequence):
        assert f.index == i
        assert f.gray.shape == f.depth_gray.shape == (32, 64)
        assert 0 <= f.gray.min() and f.gray.max() <= 1
        assert 0 <= f.depth_gray.min() and f.depth_gray.max() <= 1


def test_gray_is_8bit_quantized(sequence):
    g = sequence[0].gray * 255
    np.testing.assert_array_equal(g, np.round(g))


def test_depth_only_on_lidar_rows(sequence):
    d = sequence[0].depth
    assert not d[1::2].any()
    assert d[::2].any()


def test_same_seed_same_frames():
    a = generate_sequence(3, 2, INTR)
    b = generate_sequence(3, 2, INTR)
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa.gray, fb.gray)
        np.testing.assert_array_equal(fa.depth, fb.depth)


def test_zero_frames():
    assert generate_sequence(0, 0, INTR) == []
    with pytest.raises(ValueError):
        generate_sequence(0, -1, INTR)


def test_lidar_projection_reproduces_rendered_depth():
    # projecting the scan points lands each one back on its own pixel
    cfg = SceneConfig()
    scene = make_scene(np.random.default_rng(5), 1, cfg)
    _, depth, points = render_frame(scene, scene.poses[0], INTR, cfg)
    projected = project_point_cloud(points, INTR)
    rows = np.zeros_like(depth, dtype=bool)
    rows[::2] = True
    np.testing.assert_allclose(projected[rows], depth[rows], rtol=1e-12)
    assert not projected[~rows].any()


def test_ground_depth_follows_plane():
    # empty world: below the horizon every ray hits y = camera_height at z = h * fy / (v - cy)
    cfg = SceneConfig(min_boxes=0, max_boxes=0)
    scene = make_scene(np.random.default_rng(0), 1, cfg)
    _, depth, _ = render_frame(scene, scene.poses[0], INTR, cfg)
    v = np.arange(INTR.height)
    below = v > INTR.cy
    want = cfg.camera_height * INTR.fy / (v[below] - INTR.cy)
    got = depth[below, INTR.width // 2]
    keep = want <= 1e6
    np.testing.assert_allclose(got[keep], want[keep], rtol=1e-9)
    assert not depth[: int(INTR.cy) + 1].any()


def test_consecutive_frames_more_similar_than_distant():
    # sampled over seeds, frame t+1 is closer than frame t+50 in Chebyshev score
    cfg = SceneConfig()
    wins = 0
    seeds = range(100)
    for seed in seeds:
        scene = make_scene(np.random.default_rng(seed), 51, cfg)
        g0, _, _ = render_frame(scene, scene.poses[0], INTR, cfg)
        g1, _, _ = render_frame(scene, scene.poses[1], INTR, cfg)
        g50, _, _ = render_frame(scene, scene.poses[50], INTR, cfg)
        wins += chebyshev_score(g0, g1) < chebyshev_score(g0, g50)
    assert wins >= 95


def test_box_front_face_depth_is_analytic():
    # one box straight ahead: rays through its front face hit at z = box_min.z
    cfg = SceneConfig()
    scene = Scene(
        box_min=np.array([[-1.0, -0.5, 7.25]]),
        box_max=np.array([[1.0, cfg.camera_height, 9.0]]),
        face_albedo=np.full((1, 6), 0.5),
        face_contrast=np.full((1, 6), 0.2),
        face_period=np.full((1, 6), 0.5),
        ground_period=1.0,
        poses=[(np.zeros(3), 0.0)],
    )
    _, depth, _ = render_frame(scene, scene.poses[0], INTR, cfg)
    u = np.arange(INTR.width)
    v = np.arange(INTR.height)
    x = (u - INTR.cx) / INTR.fx * 7.25
    y = (v - INTR.cy) / INTR.fy * 7.25
    inside = (np.abs(y)[:, None] < 0.49) & (np.abs(x)[None, :] < 0.99) & (y[:, None] > -0.49)
    assert inside.sum() > 20
    np.testing.assert_allclose(depth[inside], 7.25, atol=1e-6)
