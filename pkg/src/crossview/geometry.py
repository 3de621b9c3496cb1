"""Pinhole cameras, camera paths, synthetic scenes, and paired-view rendering.

Coordinate conventions
----------------------
World frame equals the reference camera frame: x right, y down, z forward.
The reference pose (frame 0 of every camera path) is identity rotation with
the camera at the world origin. A pose maps world to camera coordinates as

    x_cam = R @ x_world + t

and a camera-frame point projects to normalized pixels

    u = cx + fx * X / Z,   v = cy + fy * Y / Z

with the visible frame spanning [0, 1] x [0, 1]. Boxes are stored as
(cx, cy, w, h) in those units; values outside the frame are legal.

The synthetic world is a desk-scale diorama: a ground plane at y = GROUND_Y
(below eye level, y points down so "down" is positive) and a fronto-parallel
back wall at z = WALL_Z. Every forward ray hits one of the two, which gives
an analytic depth for any pixel of any desk-scale view. Objects are low
oriented slabs that glide on the ground plane.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth, ObjectNotVisible, UnknownPathKind

EPSILON_Z = 1e-6

GROUND_Y = 1.2
WALL_Z = 16.0

# Orbit/arc pivot: a fixed point on the reference optical axis. Scenes are
# laid out around it so orbit paths stay aimed at the action.
SCENE_CENTER = np.array([0.0, 0.0, 6.0])

# Pixel window covered by rendered depth grids handed to warp baselines.
# Wider than the frame so box corners a bit outside [0,1] still resolve.
DEPTH_WINDOW = (-0.5, 1.5)
DEPTH_GRID_RES = 128

# Track points are marked visible inside this slightly padded frame.
VISIBILITY_PAD = 0.25

PATH_KINDS = ("static", "pan", "truck", "dolly", "orbit", "arc", "composite")


@dataclass(frozen=True)
class Intrinsics:
    """Normalized pinhole intrinsics (focal lengths and principal point)."""

    fx: float = 1.0
    fy: float = 1.0
    cx: float = 0.5
    cy: float = 0.5

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d):
        return cls(d["fx"], d["fy"], d["cx"], d["cy"])


def default_intrinsics() -> Intrinsics:
    return Intrinsics()


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3, translation length 3")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_camera(cls, r_cam_to_world, center) -> "CameraPose":
        """Build from camera axes expressed in world coords plus camera center."""
        r_cw = np.asarray(r_cam_to_world, dtype=np.float64)
        c = np.asarray(center, dtype=np.float64)
        r = r_cw.T
        return cls(r, -r @ c)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def reference_pose() -> CameraPose:
    """The canonical first-frame pose every camera path starts from."""
    return CameraPose.identity()


@dataclass(frozen=True)
class CameraPath:
    poses: tuple
    intrinsics: Intrinsics
    kind: str

    def __post_init__(self):
        if len(self.poses) == 0:
            raise ValueError("camera path needs at least one pose")

    def __len__(self):
        return len(self.poses)


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned box in normalized pixels: center + extent. May leave the frame."""

    cx: float
    cy: float
    w: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "Box2D":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass
class BoxSequence:
    boxes: list

    def __len__(self):
        return len(self.boxes)

    def __getitem__(self, i) -> Box2D:
        return self.boxes[i]

    def as_array(self) -> np.ndarray:
        return np.stack([b.as_array() for b in self.boxes])

    @classmethod
    def from_array(cls, a) -> "BoxSequence":
        return cls([Box2D.from_array(row) for row in np.asarray(a, dtype=np.float64)])


@dataclass
class TrackGrid:
    """G x G grid of point tracks over T frames, in normalized pixels."""

    tracks: np.ndarray  # (G, G, T, 2)
    visibility: np.ndarray  # (G, G, T) bool

    @property
    def grid_size(self) -> int:
        return self.tracks.shape[0]

    @property
    def frames(self) -> int:
        return self.tracks.shape[2]


@dataclass(frozen=True)
class Box3D:
    """Oriented box: center, half extents, yaw about the world y axis."""

    center: np.ndarray
    half_extents: np.ndarray
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=np.float64)
        )

    def corners(self) -> np.ndarray:
        """The 8 corners in world coordinates, yaw applied about +y."""
        hx, hy, hz = self.half_extents
        signs = np.array(
            [
                [sx, sy, sz]
                for sx in (-1.0, 1.0)
                for sy in (-1.0, 1.0)
                for sz in (-1.0, 1.0)
            ]
        )
        local = signs * np.array([hx, hy, hz])
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return local @ rot.T + self.center


@dataclass
class Scene:
    """Static background geometry plus one object trajectory.

    ground_points / landmarks are sample points of the static world, kept
    with the scene for bookkeeping; depth queries use the analytic planes.
    object_path holds one Box3D per frame.
    """

    ground_points: np.ndarray
    landmarks: np.ndarray
    object_path: list
    seed: int = 0

    @property
    def frames(self) -> int:
        return len(self.object_path)


@dataclass
class RenderResult:
    b_ref: BoxSequence
    b_tgt: BoxSequence
    tracks: TrackGrid
    context0: np.ndarray  # (context_res, context_res) inverse depths
    depth0: np.ndarray  # (DEPTH_GRID_RES, DEPTH_GRID_RES) depths, window DEPTH_WINDOW


# ------------------------------------------------------------- projection


def project_point(point, pose: CameraPose, intrinsics: Intrinsics):
    """Project one world point. Raises NonPositiveDepth for Z <= EPSILON_Z."""
    p = pose.to_camera(np.asarray(point, dtype=np.float64))
    z = p[2]
    if z <= EPSILON_Z:
        raise NonPositiveDepth(f"depth {z:.3g} behind camera")
    u = intrinsics.cx + intrinsics.fx * p[0] / z
    v = intrinsics.cy + intrinsics.fy * p[1] / z
    return float(u), float(v)


def project_points(points, pose: CameraPose, intrinsics: Intrinsics):
    """Vectorized projection of (N, 3) points; returns (N, 2) pixels and (N,) depths."""
    cam = pose.to_camera(points)
    z = cam[:, 2]
    if np.any(z <= EPSILON_Z):
        raise NonPositiveDepth("some points lie behind the camera")
    uv = np.empty((cam.shape[0], 2), dtype=np.float64)
    uv[:, 0] = intrinsics.cx + intrinsics.fx * cam[:, 0] / z
    uv[:, 1] = intrinsics.cy + intrinsics.fy * cam[:, 1] / z
    return uv, z


def project_box3d(box: Box3D, pose: CameraPose, intrinsics: Intrinsics) -> Box2D:
    """Axis-aligned hull of the box's 8 projected corners."""
    uv, _ = project_points(box.corners(), pose, intrinsics)
    lo = uv.min(axis=0)
    hi = uv.max(axis=0)
    return Box2D(
        cx=float((lo[0] + hi[0]) / 2),
        cy=float((lo[1] + hi[1]) / 2),
        w=float(hi[0] - lo[0]),
        h=float(hi[1] - lo[1]),
    )


def back_project(pixels, depths, pose: CameraPose, intrinsics: Intrinsics):
    """Invert projection through known depths: (N,2) pixels + (N,) Z -> (N,3) world."""
    uv = np.asarray(pixels, dtype=np.float64)
    z = np.asarray(depths, dtype=np.float64)
    x = (uv[:, 0] - intrinsics.cx) / intrinsics.fx * z
    y = (uv[:, 1] - intrinsics.cy) / intrinsics.fy * z
    cam = np.stack([x, y, z], axis=1)
    return (cam - pose.translation) @ pose.rotation


# ------------------------------------------------------------- scene depth


def scene_depth(pixels, pose: CameraPose, intrinsics: Intrinsics) -> np.ndarray:
    """Depth of the static scene (ground plane or back wall) at given pixels.

    Casts a ray per pixel from the camera center and intersects both planes;
    the nearer positive hit wins. Raises NonPositiveDepth when a ray escapes
    the diorama (no forward intersection), which desk-scale poses never do.
    """
    uv = np.asarray(pixels, dtype=np.float64)
    d_cam = np.stack(
        [
            (uv[:, 0] - intrinsics.cx) / intrinsics.fx,
            (uv[:, 1] - intrinsics.cy) / intrinsics.fy,
            np.ones(len(uv)),
        ],
        axis=1,
    )
    d_world = d_cam @ pose.rotation  # R^T @ d, row-wise
    c = pose.center

    with np.errstate(divide="ignore", invalid="ignore"):
        s_ground = (GROUND_Y - c[1]) / d_world[:, 1]
        s_wall = (WALL_Z - c[2]) / d_world[:, 2]
    s_ground = np.where(
        (d_world[:, 1] > 1e-12) & (s_ground > 0), s_ground, np.inf
    )
    s_wall = np.where((d_world[:, 2] > 1e-12) & (s_wall > 0), s_wall, np.inf)
    s = np.minimum(s_ground, s_wall)
    if not np.all(np.isfinite(s)):
        raise NonPositiveDepth("a view ray misses both scene planes")
    # Ray parameter s equals camera-frame depth because d_cam has unit z.
    return s


def render_depth_grid(
    pose: CameraPose,
    intrinsics: Intrinsics,
    resolution: int = DEPTH_GRID_RES,
    window=DEPTH_WINDOW,
) -> np.ndarray:
    """Static-scene depth sampled at pixel centers of a square window."""
    lo, hi = window
    step = (hi - lo) / resolution
    centers = lo + (np.arange(resolution) + 0.5) * step
    uu, vv = np.meshgrid(centers, centers, indexing="xy")
    pix = np.stack([uu.ravel(), vv.ravel()], axis=1)
    return scene_depth(pix, pose, intrinsics).reshape(resolution, resolution)


def render_context(
    pose: CameraPose, intrinsics: Intrinsics, resolution: int = 16
) -> np.ndarray:
    """Low-resolution inverse-depth image of the static scene over the frame."""
    depth = render_depth_grid(pose, intrinsics, resolution, window=(0.0, 1.0))
    return 1.0 / depth


# ------------------------------------------------------------- camera paths


def _rot_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _smoothstep(tau: np.ndarray) -> np.ndarray:
    return tau * tau * (3.0 - 2.0 * tau)


def _look_at(center, target) -> CameraPose:
    """Pose at `center` aiming the optical axis at `target`, zero roll.

    With y pointing down, "up" handling reduces to keeping the camera x axis
    horizontal: x = normalize(y_world x z), y = z x x.
    """
    c = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - c
    z = z / np.linalg.norm(z)
    x = np.cross(np.array([0.0, 1.0, 0.0]), z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    r_cw = np.stack([x, y, z], axis=1)
    return CameraPose.from_camera(r_cw, c)


def make_camera_path(
    kind: str,
    frames: int,
    magnitude: float = 1.0,
    seed: int = 0,
    intrinsics: Intrinsics = None,
) -> CameraPath:
    """Build a T-frame camera path of the given kind.

    All kinds start exactly at the reference pose and ease in/out with a
    smoothstep ramp. `magnitude` scales the sweep (sign flips direction).
    `seed` only matters for the composite kind, which mixes pan, truck and
    dolly with seeded weights.
    """
    if kind not in PATH_KINDS:
        raise UnknownPathKind(f"unknown camera path kind {kind!r}")
    if frames < 1:
        raise ValueError("frames must be >= 1")
    k = intrinsics or default_intrinsics()

    tau = np.zeros(1) if frames == 1 else np.arange(frames) / (frames - 1)
    ramp = _smoothstep(tau)

    poses = []
    if kind == "static":
        poses = [reference_pose() for _ in range(frames)]
    elif kind == "pan":
        for s in ramp:
            theta = 0.09 * magnitude * s
            poses.append(CameraPose.from_camera(_rot_y(theta), np.zeros(3)))
    elif kind == "truck":
        for s in ramp:
            c = np.array([0.44 * magnitude * s, 0.0, 0.0])
            poses.append(CameraPose.from_camera(np.eye(3), c))
    elif kind == "dolly":
        for s in ramp:
            c = np.array([0.0, 0.0, 0.8 * magnitude * s])
            poses.append(CameraPose.from_camera(np.eye(3), c))
    elif kind == "orbit":
        for s in ramp:
            phi = 0.05 * magnitude * s
            c = SCENE_CENTER + _rot_y(phi) @ (np.zeros(3) - SCENE_CENTER)
            if abs(phi) < 1e-12:
                poses.append(reference_pose())
            else:
                poses.append(_look_at(c, SCENE_CENTER))
    elif kind == "arc":
        # Sideways sweep along a circle, orientation held fixed.
        r = 2.5
        for s in ramp:
            psi = 0.16 * magnitude * s
            c = np.array([r * np.sin(psi), 0.0, r * (1.0 - np.cos(psi))])
            poses.append(CameraPose.from_camera(np.eye(3), c))
    elif kind == "composite":
        rng = np.random.default_rng(seed)
        a_pan, a_truck, a_dolly = rng.uniform(-1.0, 1.0, size=3)
        for s in ramp:
            theta = 0.08 * magnitude * a_pan * s
            c = np.array(
                [0.38 * magnitude * a_truck * s, 0.0, 0.5 * magnitude * a_dolly * s]
            )
            poses.append(CameraPose.from_camera(_rot_y(theta), c))

    return CameraPath(poses=tuple(poses), intrinsics=k, kind=kind)


# ------------------------------------------------------------- scene synthesis


def _ground_from_pixel(u, v, intrinsics: Intrinsics) -> np.ndarray:
    """Back-project a reference-view pixel onto the ground plane."""
    if v <= intrinsics.cy + 1e-6:
        raise ValueError("pixel ray does not hit the ground")
    z = GROUND_Y * intrinsics.fy / (v - intrinsics.cy)
    x = (u - intrinsics.cx) / intrinsics.fx * z
    return np.array([x, GROUND_Y, z])


def make_scene(
    seed: int,
    frames: int = 24,
    intrinsics: Intrinsics = None,
) -> Scene:
    """Sample a scene: static clutter plus one slab sliding along the ground.

    The slab footprint travels a quadratic Bezier between two ground points
    chosen in the reference view, with a seeded ease profile and either
    heading-following or constant yaw. Slabs are deliberately low so their
    surface depth stays close to the ground depth beneath them.
    """
    k = intrinsics or default_intrinsics()
    rng = np.random.default_rng(seed)

    hx = rng.uniform(0.20, 0.55)
    hz = rng.uniform(0.12, 0.32)
    hy = rng.uniform(0.01, 0.03)

    # Start/end chosen in image space so apparent size and travel are controlled.
    for _ in range(64):
        u0, v0 = rng.uniform(0.15, 0.85), rng.uniform(0.64, 0.84)
        u1, v1 = rng.uniform(0.15, 0.85), rng.uniform(0.64, 0.84)
        d = np.hypot(u1 - u0, v1 - v0)
        if 0.015 <= d <= 0.55:
            break
    p0 = _ground_from_pixel(u0, v0, k)
    p1 = _ground_from_pixel(u1, v1, k)

    um, vm = (u0 + u1) / 2, (v0 + v1) / 2
    perp = np.array([-(v1 - v0), u1 - u0])
    bend = rng.normal(0.0, 0.6)
    uc = um + bend * perp[0]
    vc = float(np.clip(vm + bend * perp[1], 0.6, 0.88))
    pc = _ground_from_pixel(uc, vc, k)

    tau = np.zeros(1) if frames == 1 else np.arange(frames) / (frames - 1)
    ease_mix = rng.uniform(0.0, 1.0)
    prof = (1.0 - ease_mix) * tau + ease_mix * _smoothstep(tau)

    # Quadratic Bezier on the ground plane.
    a = (1.0 - prof)[:, None]
    b = prof[:, None]
    centers = a * a * p0 + 2 * a * b * pc + b * b * p1
    centers[:, 1] = GROUND_Y - hy  # rest the slab on the ground

    follow_heading = rng.uniform() < 0.7
    yaw0 = rng.uniform(-np.pi, np.pi)
    yaws = np.full(frames, yaw0)
    if follow_heading and frames > 1:
        deltas = np.diff(centers[:, [0, 2]], axis=0)
        deltas = np.vstack([deltas, deltas[-1:]])
        ok = np.hypot(deltas[:, 0], deltas[:, 1]) > 1e-9
        head = np.where(ok, np.arctan2(deltas[:, 0], deltas[:, 1]), yaw0)
        yaws = np.where(ok, head, yaw0)

    half = np.array([hx, hy, hz])
    path = [Box3D(centers[t], half, float(yaws[t])) for t in range(frames)]

    n_ground = 60
    gu = rng.uniform(-0.2, 1.2, size=n_ground)
    gv = rng.uniform(0.55, 1.2, size=n_ground)
    ground_points = np.stack([_ground_from_pixel(u, v, k) for u, v in zip(gu, gv)])

    n_marks = 25
    landmarks = np.stack(
        [
            rng.uniform(-4.0, 4.0, size=n_marks),
            rng.uniform(-0.5, GROUND_Y - 0.05, size=n_marks),
            rng.uniform(3.0, WALL_Z - 1.0, size=n_marks),
        ],
        axis=1,
    )

    return Scene(
        ground_points=ground_points,
        landmarks=landmarks,
        object_path=path,
        seed=seed,
    )


# ------------------------------------------------------------- paired render


def render_pair(
    scene: Scene,
    path: CameraPath,
    grid_size: int = 12,
    context_res: int = 16,
) -> RenderResult:
    """Render the two coupled views of one scene/path pair.

    b_ref projects every frame's object box through pose[0] (the static
    first-frame view); b_tgt projects frame t through pose[t]. Tracks are a
    G x G grid of frame-0 pixels back-projected through the static scene's
    frame-0 depth and re-projected by every pose. context0 is a low-res
    inverse-depth image from pose[0]; depth0 is the wide-window depth grid
    warp baselines sample.
    """
    frames = scene.frames
    if len(path.poses) != frames:
        raise ValueError(
            f"camera path has {len(path.poses)} poses for {frames} object frames"
        )
    k = path.intrinsics
    pose0 = path.poses[0]

    try:
        b_ref = BoxSequence(
            [project_box3d(box, pose0, k) for box in scene.object_path]
        )
        b_tgt = BoxSequence(
            [
                project_box3d(box, path.poses[t], k)
                for t, box in enumerate(scene.object_path)
            ]
        )
    except NonPositiveDepth as e:
        raise ObjectNotVisible(str(e)) from e

    g = grid_size
    centers = (np.arange(g) + 0.5) / g
    uu, vv = np.meshgrid(centers, centers, indexing="xy")
    pix0 = np.stack([uu.ravel(), vv.ravel()], axis=1)  # row-major over the grid
    depths0 = scene_depth(pix0, pose0, k)
    world = back_project(pix0, depths0, pose0, k)

    tracks = np.empty((g * g, frames, 2), dtype=np.float64)
    visible = np.empty((g * g, frames), dtype=bool)
    pad = VISIBILITY_PAD
    for t, pose in enumerate(path.poses):
        cam = pose.to_camera(world)
        z = cam[:, 2]
        ok = z > EPSILON_Z
        zs = np.where(ok, z, 1.0)
        u = k.cx + k.fx * cam[:, 0] / zs
        v = k.cy + k.fy * cam[:, 1] / zs
        tracks[:, t, 0] = np.where(ok, u, 0.0)
        tracks[:, t, 1] = np.where(ok, v, 0.0)
        visible[:, t] = (
            ok & (u >= -pad) & (u <= 1 + pad) & (v >= -pad) & (v <= 1 + pad)
        )

    grid = TrackGrid(
        tracks=tracks.reshape(g, g, frames, 2),
        visibility=visible.reshape(g, g, frames),
    )
    context0 = render_context(pose0, k, context_res)
    depth0 = render_depth_grid(pose0, k)
    return RenderResult(
        b_ref=b_ref, b_tgt=b_tgt, tracks=grid, context0=context0, depth0=depth0
    )
