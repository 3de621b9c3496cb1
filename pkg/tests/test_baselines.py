"""Interpolation and depth-warp baselines against closed-form oracles."""

import numpy as np
import pytest

from crossview import metrics
from crossview.baselines import (
    NOISE_PRESETS,
    WarpConfig,
    bilinear_depth,
    depth_warp,
    interpolation_baseline,
    preset_config,
)
from crossview.datapipe import load_records, record_camera_path
from crossview.errors import DepthLookupOutOfRange, LengthMismatch, NonPositiveDepth
from crossview.geometry import (
    DEPTH_WINDOW,
    default_intrinsics,
    make_camera_path,
)


def _centers(res, window=DEPTH_WINDOW):
    lo, hi = window
    return lo + (np.arange(res) + 0.5) / res * (hi - lo)


def test_interpolation_baseline_copies_as_float64():
    src = np.arange(12, dtype=np.float32).reshape(3, 4)
    out = interpolation_baseline(src)
    assert out.dtype == np.float64
    assert np.array_equal(out, src.astype(np.float64))
    out[0, 0] = -99.0
    assert src[0, 0] == 0.0


def test_bilinear_depth_reproduces_linear_ramp():
    # bilinear interpolation is exact on any affine depth field
    res = 9
    u = _centers(res)
    uu, vv = np.meshgrid(u, u)
    depth0 = 3.0 + 0.7 * uu - 0.4 * vv
    rng = np.random.default_rng(0)
    lo, hi = u[0], u[-1]
    pts = rng.uniform(lo, hi, size=(64, 2))
    got = bilinear_depth(depth0, pts)
    want = 3.0 + 0.7 * pts[:, 0] - 0.4 * pts[:, 1]
    assert np.max(np.abs(got - want)) < 1e-12


def test_bilinear_depth_exact_at_grid_centers():
    res = 5
    rng = np.random.default_rng(1)
    depth0 = rng.uniform(1.0, 9.0, size=(res, res))
    u = _centers(res)
    pts = np.array([[u[j], u[i]] for i in range(res) for j in range(res)])
    got = bilinear_depth(depth0, pts)
    assert np.max(np.abs(got - depth0.reshape(-1))) < 1e-12


def test_bilinear_depth_rejects_out_of_window():
    depth0 = np.ones((4, 4))
    lo, hi = DEPTH_WINDOW
    with pytest.raises(DepthLookupOutOfRange):
        bilinear_depth(depth0, np.array([[hi + 0.1, 0.5]]))
    with pytest.raises(DepthLookupOutOfRange):
        bilinear_depth(depth0, np.array([[0.5, lo - 0.1]]))
    # window edges are legal
    bilinear_depth(depth0, np.array([[lo, hi], [hi, lo]]))


def _box_corners(row):
    cx, cy, w, h = row
    return np.array(
        [
            [cx - w / 2, cy - h / 2],
            [cx + w / 2, cy - h / 2],
            [cx - w / 2, cy + h / 2],
            [cx + w / 2, cy + h / 2],
        ]
    )


def test_corner_warp_matches_rotation_homography():
    # with a rotation-only camera the warp is depth independent, so every
    # corner maps by rotating its ray; the box is the hull of the corners
    frames = 6
    path = make_camera_path("pan", frames, magnitude=1.4)
    k = default_intrinsics()
    rng = np.random.default_rng(2)
    depth0 = rng.uniform(2.0, 12.0, size=(11, 11))
    b_ref = np.tile([0.42, 0.55, 0.22, 0.16], (frames, 1))
    out = depth_warp(b_ref, path, depth0, WarpConfig(mode="corners"))
    for t in range(frames):
        rot = path.poses[t].rotation
        mapped = []
        for u, v in _box_corners(b_ref[t]):
            ray = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
            cam = rot @ ray
            mapped.append([k.cx + k.fx * cam[0] / cam[2], k.cy + k.fy * cam[1] / cam[2]])
        mapped = np.array(mapped)
        lo = mapped.min(axis=0)
        hi = mapped.max(axis=0)
        want = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, hi[0] - lo[0], hi[1] - lo[1]]
        assert np.max(np.abs(out[t] - want)) < 1e-7


def test_static_path_warp_is_identity_both_modes():
    frames = 5
    path = make_camera_path("static", frames)
    rng = np.random.default_rng(3)
    depth0 = rng.uniform(2.0, 10.0, size=(8, 8))
    b_ref = np.column_stack(
        [
            rng.uniform(0.3, 0.7, frames),
            rng.uniform(0.3, 0.7, frames),
            rng.uniform(0.1, 0.3, frames),
            rng.uniform(0.1, 0.3, frames),
        ]
    )
    for mode in ("corners", "center"):
        out = depth_warp(b_ref, path, depth0, WarpConfig(mode=mode))
        assert np.max(np.abs(out - b_ref)) < 1e-9, mode


def test_frame_zero_is_exact_under_heavy_noise():
    # frame 0 holds the gauge: its pose is never perturbed, and with the
    # reference pose the depth term cancels, so noise cannot touch it
    frames = 4
    path = make_camera_path("truck", frames, magnitude=1.0)
    rng = np.random.default_rng(4)
    depth0 = rng.uniform(2.0, 10.0, size=(8, 8))
    b_ref = np.tile([0.5, 0.5, 0.2, 0.2], (frames, 1))
    for seed in range(6):
        cfg = WarpConfig(
            mode="corners",
            depth_noise_sigma=0.5,
            rot_noise_sigma=0.3,
            trans_noise_sigma=0.5,
            seed=seed,
        )
        out = depth_warp(b_ref, path, depth0, cfg)
        assert np.max(np.abs(out[0] - b_ref[0])) < 1e-9
        assert np.max(np.abs(out[1:] - b_ref[1:])) > 1e-3


def test_depth_warp_validates_pose_count_and_depth_sign():
    path = make_camera_path("pan", 4)
    b_ref = np.tile([0.5, 0.5, 0.2, 0.2], (5, 1))
    with pytest.raises(LengthMismatch):
        depth_warp(b_ref, path, np.ones((4, 4)), WarpConfig())
    tiny = np.full((4, 4), 1e-9)
    for mode in ("corners", "center"):
        with pytest.raises(NonPositiveDepth):
            depth_warp(b_ref[:4], path, tiny, WarpConfig(mode=mode))


def test_warp_config_rejects_unknown_mode():
    with pytest.raises(ValueError):
        WarpConfig(mode="homography")


def test_preset_config_lookup_and_seed():
    cfg = preset_config("noisy-low", seed=77)
    assert cfg.seed == 77
    assert cfg.depth_noise_sigma == NOISE_PRESETS["noisy-low"].depth_noise_sigma
    assert NOISE_PRESETS["noisy-low"].seed == 0
    with pytest.raises(KeyError):
        preset_config("noisy-medium")


def _eval_records(dataset_dir, n=8):
    records = [r for r in load_records(dataset_dir, "eval") if r.depth0 is not None]
    assert records
    return records[:n]


def _mean_warp_iou(records, sigma, seeds=(0, 1, 2)):
    vals = []
    for i, rec in enumerate(records):
        path = record_camera_path(rec)
        for s in seeds:
            cfg = WarpConfig(mode="corners", depth_noise_sigma=sigma, seed=1000 * s + i)
            pred = depth_warp(rec.b_ref, path, rec.depth0, cfg)
            vals.append(metrics.iou_frames(pred, rec.b_tgt).mean())
    return float(np.mean(vals))


def test_accuracy_degrades_with_depth_noise(small_dataset):
    records = _eval_records(small_dataset)
    sigmas = [0.0, 0.05, 0.1, 0.2]
    means = [_mean_warp_iou(records, s) for s in sigmas]
    for a, b in zip(means, means[1:]):
        assert b < a + 1e-4, means
    assert means[0] - means[-1] > 0.01, means


def test_noise_presets_order_by_quality(small_dataset):
    records = _eval_records(small_dataset)
    scores = {}
    for name in ("noisy-high", "noisy-low"):
        vals = []
        for i, rec in enumerate(records):
            cfg = preset_config(name, seed=i)
            pred = depth_warp(rec.b_ref, record_camera_path(rec), rec.depth0, cfg)
            vals.append(metrics.iou_frames(pred, rec.b_tgt).mean())
        scores[name] = float(np.mean(vals))
    clean = _mean_warp_iou(records, 0.0, seeds=(0,))
    assert scores["noisy-high"] < scores["noisy-low"] < clean
