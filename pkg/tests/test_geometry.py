import numpy as np
import pytest

from crossview.errors import NonPositiveDepth, ObjectNotVisible, UnknownPathKind
from crossview.geometry import (
    GROUND_Y,
    PATH_KINDS,
    SCENE_CENTER,
    WALL_Z,
    Box3D,
    CameraPose,
    Intrinsics,
    Scene,
    back_project,
    make_camera_path,
    make_scene,
    project_box3d,
    project_point,
    project_points,
    reference_pose,
    render_pair,
    scene_depth,
)

K = Intrinsics()
REF = reference_pose()
ALL_KINDS = [k for k in PATH_KINDS if k != "static"]


def test_project_point_oracle():
    # unit focal, center 0.5: X/Z=0.5 lands one half-frame right of center
    u, v = project_point(np.array([1.0, 0.0, 2.0]), REF, K)
    assert (u, v) == (1.0, 0.5)
    u, v = project_point(np.array([0.0, 0.0, 5.0]), REF, K)
    assert (u, v) == (0.5, 0.5)


def test_project_point_rejects_non_positive_depth():
    for z in (0.0, -1.0, 1e-9):
        with pytest.raises(NonPositiveDepth):
            project_point(np.array([0.0, 0.0, z]), REF, K)


def test_project_points_matches_scalar_projection():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(40, 3))
    pts[:, 2] = rng.uniform(1.0, 9.0, size=40)
    uv, depths = project_points(pts, REF, K)
    for i in range(40):
        np.testing.assert_allclose(uv[i], project_point(pts[i], REF, K), atol=1e-12)
        assert abs(depths[i] - pts[i, 2]) < 1e-12


def test_axis_aligned_cube_projection_oracle():
    box = Box3D(center=[0.0, 0.0, 3.0], half_extents=[1.0, 1.0, 1.0], yaw=0.0)
    b = project_box3d(box, REF, K)
    # near face at z=2 dominates the hull: [0,1] x [0,1]
    np.testing.assert_allclose([b.cx, b.cy, b.w, b.h], [0.5, 0.5, 1.0, 1.0], atol=1e-12)


def test_yawed_cube_projection_oracle():
    box = Box3D(center=[0.0, 0.0, 3.0], half_extents=[1.0, 1.0, 1.0], yaw=np.pi / 4)
    b = project_box3d(box, REF, K)
    # 45-degree yaw: x extremes sqrt(2) at depth 3, y extremes at depth 3-sqrt(2)
    np.testing.assert_allclose(b.w, 2 * np.sqrt(2) / 3, atol=1e-12)
    np.testing.assert_allclose(b.h, 2.0 / (3 - np.sqrt(2)), atol=1e-12)
    np.testing.assert_allclose([b.cx, b.cy], [0.5, 0.5], atol=1e-12)


def test_camera_pose_validation():
    with pytest.raises(ValueError):
        CameraPose(rotation=np.eye(3) * 2.0, translation=np.zeros(3))
    flipped = np.diag([1.0, 1.0, -1.0])  # orthonormal but improper
    with pytest.raises(ValueError):
        CameraPose(rotation=flipped, translation=np.zeros(3))


def test_pose_center_and_to_camera_roundtrip():
    rng = np.random.default_rng(4)
    # random proper rotation via QR
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    center = rng.uniform(-2, 2, size=3)
    pose = CameraPose.from_camera(q, center)
    np.testing.assert_allclose(pose.center, center, atol=1e-12)
    np.testing.assert_allclose(pose.to_camera(center[None, :]), 0.0, atol=1e-12)
    pts = rng.uniform(-3, 3, size=(10, 3))
    np.testing.assert_allclose(
        pose.to_camera(pts), (pts - center) @ pose.rotation.T, atol=1e-12
    )


def test_back_project_reprojects_to_same_pixels():
    rng = np.random.default_rng(7)
    for seed in range(5):
        path = make_camera_path("composite", 8, 1.0, seed=seed)
        pose = path.poses[-1]
        pixels = rng.uniform(0.05, 0.95, size=(30, 2))
        depths = rng.uniform(1.0, 10.0, size=30)
        world = back_project(pixels, depths, pose, K)
        uv, z = project_points(world, pose, K)
        np.testing.assert_allclose(uv, pixels, atol=1e-7)
        np.testing.assert_allclose(z, depths, atol=1e-7)


def test_scene_depth_oracles():
    # principal ray travels straight down +z and hits the back wall
    d = scene_depth(np.array([[0.5, 0.5]]), REF, K)
    assert abs(d[0] - WALL_Z) < 1e-12
    # ray through (0.5, 1.0) drops at slope 0.5: ground y=1.2 at z=2.4
    d = scene_depth(np.array([[0.5, 1.0]]), REF, K)
    assert abs(d[0] - 2.4) < 1e-12


def test_scene_depth_miss_raises():
    # camera yawed 180 degrees: rays leave both planes behind
    turned = CameraPose(
        rotation=np.array([[-1.0, 0, 0], [0, 1.0, 0], [0, 0, -1.0]]),
        translation=np.zeros(3),
    )
    with pytest.raises(NonPositiveDepth):
        scene_depth(np.array([[0.5, 0.4]]), turned, K)


def test_unknown_path_kind_rejected():
    with pytest.raises(UnknownPathKind):
        make_camera_path("zoom", 24)


def test_every_kind_starts_at_reference_pose():
    for kind in PATH_KINDS:
        path = make_camera_path(kind, 24, 1.0, seed=3)
        assert len(path.poses) == 24
        np.testing.assert_allclose(path.poses[0].rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(path.poses[0].translation, 0.0, atol=1e-12)


def test_all_rotations_proper_orthonormal():
    for kind in ALL_KINDS:
        path = make_camera_path(kind, 24, 1.3, seed=5)
        for pose in path.poses:
            r = pose.rotation
            np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(r) - 1.0) < 1e-9


def test_orbit_keeps_pivot_on_principal_point():
    path = make_camera_path("orbit", 24, 1.0, seed=2)
    for pose in path.poses:
        uv = project_point(SCENE_CENTER, pose, K)
        np.testing.assert_allclose(uv, [0.5, 0.5], atol=1e-9)


def test_zero_magnitude_equals_static():
    static = make_camera_path("static", 12)
    for kind in ("pan", "truck", "dolly", "arc"):
        path = make_camera_path(kind, 12, 0.0, seed=1)
        for a, b in zip(path.poses, static.poses):
            np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-12)
            np.testing.assert_allclose(a.translation, b.translation, atol=1e-12)


def test_camera_path_determinism():
    for kind in ALL_KINDS:
        a = make_camera_path(kind, 24, 0.9, seed=11)
        b = make_camera_path(kind, 24, 0.9, seed=11)
        for pa, pb in zip(a.poses, b.poses):
            assert np.array_equal(pa.rotation, pb.rotation)
            assert np.array_equal(pa.translation, pb.translation)


def test_make_scene_slab_rests_on_ground():
    for seed in range(6):
        scene = make_scene(seed, frames=24)
        assert scene.frames == 24
        for box in scene.object_path:
            top = np.max(box.corners()[:, 1])
            assert abs(top - GROUND_Y) < 1e-9  # y grows downward; max y = underside


def test_render_pair_first_frames_agree():
    scene = make_scene(3, frames=24)
    path = make_camera_path("truck", 24, 1.0, seed=3)
    out = render_pair(scene, path)
    b_ref = out.b_ref.as_array()
    b_tgt = out.b_tgt.as_array()
    assert b_ref.shape == b_tgt.shape == (24, 4)
    np.testing.assert_allclose(b_ref[0], b_tgt[0], atol=1e-9)


def test_render_pair_static_path_views_identical():
    scene = make_scene(5, frames=16)
    out = render_pair(scene, make_camera_path("static", 16))
    np.testing.assert_array_equal(out.b_ref.as_array(), out.b_tgt.as_array())


def test_render_pair_track_grid_shapes_and_frame0():
    scene = make_scene(1, frames=12)
    out = render_pair(scene, make_camera_path("pan", 12, 1.0, seed=1), grid_size=6)
    assert out.tracks.tracks.shape == (6, 6, 12, 2)
    assert out.tracks.visibility.shape == (6, 6, 12)
    assert out.tracks.visibility.dtype == np.bool_
    assert out.tracks.visibility[:, :, 0].all()
    # frame 0 tracks are the seeding pixel-center lattice
    centers = (np.arange(6) + 0.5) / 6
    np.testing.assert_allclose(out.tracks.tracks[2, 4, 0], [centers[4], centers[2]], atol=1e-9)
    assert out.context0.shape == (16, 16)
    assert np.all(out.context0 > 0)
    assert out.depth0.shape == (128, 128)
    assert np.all(out.depth0 > 0)


def test_render_pair_bit_determinism():
    scene_a = make_scene(8, frames=24)
    scene_b = make_scene(8, frames=24)
    path_a = make_camera_path("orbit", 24, 1.0, seed=8)
    path_b = make_camera_path("orbit", 24, 1.0, seed=8)
    out_a = render_pair(scene_a, path_a)
    out_b = render_pair(scene_b, path_b)
    assert np.array_equal(out_a.b_tgt.as_array(), out_b.b_tgt.as_array())
    assert np.array_equal(out_a.tracks.tracks, out_b.tracks.tracks)
    assert np.array_equal(out_a.depth0, out_b.depth0)


def test_object_behind_camera_raises_object_not_visible():
    # dolly pushes the camera past a slab parked at z=1
    slab = Box3D(center=[0.0, GROUND_Y - 0.02, 1.0], half_extents=[0.3, 0.02, 0.2], yaw=0.0)
    scene = Scene(
        ground_points=np.zeros((0, 3)),
        landmarks=np.zeros((0, 3)),
        object_path=[slab] * 24,
    )
    path = make_camera_path("dolly", 24, 2.0, seed=0)
    with pytest.raises(ObjectNotVisible):
        render_pair(scene, path)


def test_intrinsics_dict_roundtrip():
    k = Intrinsics()
    assert Intrinsics.from_dict(k.to_dict()) == k
