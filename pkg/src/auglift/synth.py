"""Synthetic scene generator: poses, capsule-body depth renders, detections.

Produces fully labeled samples without real datasets or pretrained models:

* a kinematic-chain pose sampler with fixed bone lengths and bounded joint
  angles, placed at a configurable camera distance (this is the knob that
  creates in-distribution vs. out-of-distribution splits),
* a z-buffer depth renderer over per-bone capsules plus a head sphere
  (analytic ray intersections, so occlusion boundaries are exact),
* a visibility test against the rendered raster,
* a detector simulator that jitters projected keypoints and emits
  confidences correlated with visibility (logistic in the occlusion margin).

Camera convention: camera at the origin looking along +Z, x right, y down
(matching the raster's row direction).  All geometry is in meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .skeleton import (
    INVALID_DEPTH,
    CameraIntrinsics,
    ConfidenceVec,
    DepthRaster,
    DetectionFrame,
    Pose2D,
    Pose3D,
    SkeletonTopology,
    default_topology,
    project_points,
    root_center,
)

# Rest-pose offset of every joint from its parent (meters), T-pose, y down.
# Index order matches skeleton.JOINT_NAMES_17.
REST_OFFSETS_17 = np.array(
    [
        [0.00, 0.00, 0.0],  # pelvis (root)
        [-0.13, 0.02, 0.0],  # right_hip
        [0.00, 0.45, 0.0],  # right_knee
        [0.00, 0.45, 0.0],  # right_ankle
        [0.13, 0.02, 0.0],  # left_hip
        [0.00, 0.45, 0.0],  # left_knee
        [0.00, 0.45, 0.0],  # left_ankle
        [0.00, -0.25, 0.0],  # spine
        [0.00, -0.25, 0.0],  # thorax
        [0.00, -0.12, 0.0],  # neck
        [0.00, -0.12, 0.0],  # head
        [0.19, 0.02, 0.0],  # left_shoulder
        [0.28, 0.00, 0.0],  # left_elbow
        [0.25, 0.00, 0.0],  # left_wrist
        [-0.19, 0.02, 0.0],  # right_shoulder
        [-0.28, 0.00, 0.0],  # right_elbow
        [-0.25, 0.00, 0.0],  # right_wrist
    ]
)

# Max |angle| in radians for each joint's bone (parent -> joint), per axis.
DEFAULT_ANGLE_RANGES_17 = np.array(
    [
        0.00,  # pelvis (root orientation handled separately)
        0.20, 0.80, 0.90,  # right leg: hip, thigh->knee, shin->ankle
        0.20, 0.80, 0.90,  # left leg
        0.25, 0.25, 0.35, 0.30,  # spine, thorax, neck, head
        0.25, 1.10, 1.20,  # left arm: clavicle, upper arm, forearm
        0.25, 1.10, 1.20,  # right arm
    ]
)


@dataclass(frozen=True)
class BodyModel:
    """Capsules along each bone plus one sphere at the head joint."""

    bones: tuple[tuple[int, int], ...]
    capsule_radii: np.ndarray  # one radius per bone, meters
    head_joint: int
    head_radius: float

    def __post_init__(self):
        radii = np.asarray(self.capsule_radii, dtype=np.float64)
        if radii.shape != (len(self.bones),):
            raise ValueError("need exactly one radius per bone")
        if np.any(radii <= 0) or self.head_radius <= 0:
            raise ValueError("all radii must be > 0")
        radii = radii.copy()
        radii.setflags(write=False)
        object.__setattr__(self, "capsule_radii", radii)


def default_body(topology: SkeletonTopology | None = None) -> BodyModel:
    """Torso capsules thicker than limbs; sphere on the head joint."""
    topology = topology or default_topology()
    bones = tuple(topology.bones())
    thick = {"right_hip", "left_hip", "spine", "thorax"}
    medium = {"right_knee", "left_knee", "left_shoulder", "right_shoulder", "neck", "head"}
    radii = []
    for _, child in bones:
        name = topology.joint_names[child]
        if name in thick:
            radii.append(0.11)
        elif name in medium:
            radii.append(0.07)
        else:
            radii.append(0.05)
    head_joint = topology.joint_names.index("head")
    return BodyModel(bones, np.array(radii), head_joint=head_joint, head_radius=0.10)


@dataclass(frozen=True)
class SceneConfig:
    """Everything the generator needs; splits differ mainly in camera distance."""

    camera_distance_range: tuple[float, float] = (5.22, 6.12)
    angle_scale: float = 1.0
    root_yaw_range: float = float(np.pi)
    root_tilt_range: float = 0.15
    lateral_jitter: float = 0.15
    vertical_jitter: float = 0.10
    resolution: int = 176
    focal: float = 150.0
    sigma_vis: float = 1.0
    sigma_occ: float = 4.0
    conf_softness: float = 0.08
    conf_noise: float = 0.10
    visibility_margin: float = 0.15
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.camera_distance_range
        if not 0 < lo < hi:
            raise ValueError("camera_distance_range must satisfy 0 < min < max")
        if not 0 <= self.sigma_vis <= self.sigma_occ:
            raise ValueError("need sigma_occ >= sigma_vis >= 0")
        if self.resolution < 8 or self.focal <= 0:
            raise ValueError("invalid camera geometry")

    def camera(self) -> CameraIntrinsics:
        c = (self.resolution - 1) / 2.0
        return CameraIntrinsics(
            focal=self.focal,
            principal_point=(c, c),
            resolution=(self.resolution, self.resolution),
        )

    def to_dict(self) -> dict:
        return {
            "camera_distance_range": list(self.camera_distance_range),
            "angle_scale": self.angle_scale,
            "root_yaw_range": self.root_yaw_range,
            "root_tilt_range": self.root_tilt_range,
            "lateral_jitter": self.lateral_jitter,
            "vertical_jitter": self.vertical_jitter,
            "resolution": self.resolution,
            "focal": self.focal,
            "sigma_vis": self.sigma_vis,
            "sigma_occ": self.sigma_occ,
            "conf_softness": self.conf_softness,
            "conf_noise": self.conf_noise,
            "visibility_margin": self.visibility_margin,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        if "camera_distance_range" in d:
            d["camera_distance_range"] = tuple(d["camera_distance_range"])
        return cls(**d)


@dataclass(frozen=True)
class LabeledSample:
    gt_pose3d_camera: np.ndarray  # (K, 3) absolute camera-space meters
    gt_pose3d_rel: Pose3D  # root-relative millimeters
    detection: DetectionFrame
    depth: DepthRaster
    visibility: np.ndarray  # (K,) bool


def _rot_xyz(rx: float, ry: float, rz: float) -> np.ndarray:
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    rot_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    rot_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rot_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rot_z @ rot_y @ rot_x


def sample_pose3d(
    rng: np.random.Generator,
    topology: SkeletonTopology | None = None,
    angle_ranges: np.ndarray | None = None,
    rest_offsets: np.ndarray | None = None,
    root_rotation: np.ndarray | None = None,
) -> np.ndarray:
    """Forward-kinematics pose sample with exact canonical bone lengths.

    Each non-root joint's bone direction is perturbed by uniform per-axis
    angles in +-angle_ranges[j], composed down the chain; rotations are
    orthogonal so bone lengths are preserved exactly.  Zero ranges and an
    identity root rotation reproduce the rest pose.  Returns (K, 3) joints in
    meters with the root at the origin.
    """
    topology = topology or default_topology()
    k = topology.joint_count
    if rest_offsets is None:
        if k != 17:
            raise ValueError("built-in rest pose only covers the 17-joint topology")
        rest_offsets = REST_OFFSETS_17
    if angle_ranges is None:
        if k != 17:
            raise ValueError("built-in angle ranges only cover the 17-joint topology")
        angle_ranges = DEFAULT_ANGLE_RANGES_17
    angle_ranges = np.asarray(angle_ranges, dtype=np.float64)
    if angle_ranges.shape != (k,):
        raise ValueError(f"angle_ranges must have shape ({k},)")

    # draw all angles up front so consumption order is fixed
    angles = rng.uniform(-1.0, 1.0, size=(k, 3)) * angle_ranges[:, None]

    joints = np.zeros((k, 3))
    rotations = [np.eye(3)] * k
    rotations[topology.root_index] = (
        np.eye(3) if root_rotation is None else np.asarray(root_rotation, dtype=np.float64)
    )
    # parents precede children in the default topology; verify and walk in order
    order = sorted(range(k), key=lambda j: _depth_in_tree(topology, j))
    for j in order:
        p = topology.parent_index[j]
        if p == -1:
            continue
        local = _rot_xyz(*angles[j])
        rotations[j] = rotations[p] @ local
        joints[j] = joints[p] + rotations[j] @ rest_offsets[j]
    return joints


def _depth_in_tree(topology: SkeletonTopology, j: int) -> int:
    d = 0
    while topology.parent_index[j] != -1:
        j = topology.parent_index[j]
        d += 1
    return d


# ---------------------------------------------------------------------------
# Depth rendering
# ---------------------------------------------------------------------------


def _pixel_rays(cam: CameraIntrinsics, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Unit ray directions through the given pixel centers, shape (N, 3)."""
    cx, cy = cam.principal_point
    d = np.stack(
        [(us - cx) / cam.focal, (vs - cy) / cam.focal, np.ones_like(us, dtype=np.float64)],
        axis=1,
    )
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _ray_capsule_depth(dirs: np.ndarray, a: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Z-depth of the nearest hit of origin rays with capsule (a, b, radius).

    Rays start at the origin with unit directions ``dirs`` (N, 3).  Returns
    +inf where the ray misses.  Cylindrical body plus spherical caps.
    """
    n = dirs.shape[0]
    t_best = np.full(n, np.inf)

    ba = b - a
    baba = float(ba @ ba)
    oa = -a  # ray origin minus a

    if baba > 0:
        bard = dirs @ ba
        baoa = float(oa @ ba)
        rdoa = dirs @ oa
        oaoa = float(oa @ oa)
        aq = baba - bard**2
        bq = baba * rdoa - baoa * bard
        cq = baba * oaoa - baoa**2 - radius**2 * baba
        disc = bq**2 - aq * cq
        ok = (disc >= 0) & (np.abs(aq) > 1e-12)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ok, (-bq - sq) / aq, np.inf)
        y = baoa + t * bard
        body = ok & (t > 1e-9) & (y >= 0) & (y <= baba)
        t_best = np.where(body & (t < t_best), t, t_best)

    for center in (a, b):
        oc = -center
        bq = dirs @ oc
        cq = float(oc @ oc) - radius**2
        disc = bq**2 - cq
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t = np.where(ok, -bq - sq, np.inf)
        cap = ok & (t > 1e-9)
        t_best = np.where(cap & (t < t_best), t, t_best)

    return t_best * dirs[:, 2]  # planar z-depth


def _capsule_pixel_bbox(
    cam: CameraIntrinsics, a: np.ndarray, b: np.ndarray, radius: float, pad: float = 2.0
) -> tuple[int, int, int, int] | None:
    """Conservative integer pixel bbox of the projected capsule, or None."""
    w, h = cam.resolution
    zmin = min(a[2], b[2]) - radius
    if zmin <= 1e-3:
        return None
    uv = project_points(np.stack([a, b]), cam)
    r_px = radius * cam.focal / zmin + pad
    u0 = int(np.floor(uv[:, 0].min() - r_px))
    u1 = int(np.ceil(uv[:, 0].max() + r_px))
    v0 = int(np.floor(uv[:, 1].min() - r_px))
    v1 = int(np.ceil(uv[:, 1].max() + r_px))
    u0, u1 = max(u0, 0), min(u1, w - 1)
    v0, v1 = max(v0, 0), min(v1, h - 1)
    if u0 > u1 or v0 > v1:
        return None
    return u0, u1, v0, v1


def render_depth(joints: np.ndarray, body: BodyModel, cam: CameraIntrinsics) -> DepthRaster:
    """Z-buffer render of the capsule body; background pixels carry the sentinel."""
    joints = np.asarray(joints, dtype=np.float64)
    if np.any(joints[:, 2] <= 0):
        raise ValueError("all joints must be in front of the camera")
    w, h = cam.resolution
    buf = np.full((h, w), np.inf)

    prims: list[tuple[np.ndarray, np.ndarray, float]] = [
        (joints[p], joints[c], r) for (p, c), r in zip(body.bones, body.capsule_radii)
    ]
    head = joints[body.head_joint]
    prims.append((head, head, body.head_radius))

    for a, b, radius in prims:
        box = _capsule_pixel_bbox(cam, a, b, radius)
        if box is None:
            continue
        u0, u1, v0, v1 = box
        uu, vv = np.meshgrid(np.arange(u0, u1 + 1), np.arange(v0, v1 + 1))
        dirs = _pixel_rays(cam, uu.ravel().astype(np.float64), vv.ravel().astype(np.float64))
        z = _ray_capsule_depth(dirs, a, b, radius).reshape(vv.shape)
        region = buf[v0 : v1 + 1, u0 : u1 + 1]
        np.minimum(region, z, out=region)

    out = np.where(np.isfinite(buf), buf, INVALID_DEPTH).astype(np.float32)
    # never emit exact INVALID collisions from real geometry
    return DepthRaster(out)


def compute_visibility(
    joints: np.ndarray,
    depth: DepthRaster,
    cam: CameraIntrinsics,
    margin: float,
) -> np.ndarray:
    """Joint j is visible iff its projected pixel is in frame and the raster
    there is not more than ``margin`` meters in front of the joint."""
    joints = np.asarray(joints, dtype=np.float64)
    w, h = cam.resolution
    visible = np.zeros(joints.shape[0], dtype=bool)
    uv = project_points(joints, cam)
    for j, (u, v) in enumerate(uv):
        ui, vi = int(np.rint(u)), int(np.rint(v))
        if not (0 <= ui < w and 0 <= vi < h):
            continue
        visible[j] = float(depth.data[vi, ui]) >= joints[j, 2] - margin
    return visible


# ---------------------------------------------------------------------------
# Detection simulation
# ---------------------------------------------------------------------------


def simulate_detection(
    joints: np.ndarray,
    visibility: np.ndarray,
    cam: CameraIntrinsics,
    cfg: SceneConfig,
    rng: np.random.Generator,
    depth: DepthRaster | None = None,
    frame_id: int = 0,
    subject_id: int = 0,
) -> DetectionFrame:
    """Noisy keypoints plus confidences correlated with visibility.

    Keypoint jitter is Gaussian with sigma_vis for visible and sigma_occ for
    occluded joints.  Confidence is a logistic function of how far the
    rendered surface sits in front of the joint (its occlusion margin), plus
    Gaussian noise, clamped to [0, 1]; without a raster the margin reduces to
    visible/occluded.
    """
    joints = np.asarray(joints, dtype=np.float64)
    k = joints.shape[0]
    visibility = np.asarray(visibility, dtype=bool)
    uv = project_points(joints, cam)

    sigma = np.where(visibility, cfg.sigma_vis, cfg.sigma_occ)
    jitter = rng.normal(size=(k, 2)) * sigma[:, None]
    kps = uv + jitter

    # occlusion gap: how far the nearest rendered surface sits in front
    gap = np.where(visibility, 0.0, 2.0 * cfg.visibility_margin)
    if depth is not None:
        w, h = cam.resolution
        for j in range(k):
            ui, vi = int(np.rint(uv[j, 0])), int(np.rint(uv[j, 1]))
            if 0 <= ui < w and 0 <= vi < h:
                gap[j] = joints[j, 2] - float(depth.data[vi, ui])
            else:
                gap[j] = 10.0 * cfg.visibility_margin  # out of frame: no support
    raw = 1.0 / (1.0 + np.exp((gap - cfg.visibility_margin) / max(cfg.conf_softness, 1e-9)))
    conf = raw + rng.normal(size=k) * cfg.conf_noise
    conf = np.clip(conf, 0.0, 1.0)

    return DetectionFrame(
        pose=Pose2D(kps),
        conf=ConfidenceVec(conf),
        frame_id=frame_id,
        subject_id=subject_id,
    )


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def _place_pose(
    pose: np.ndarray, cfg: SceneConfig, rng: np.random.Generator
) -> np.ndarray:
    lo, hi = cfg.camera_distance_range
    z = rng.uniform(lo, hi)
    x = rng.uniform(-cfg.lateral_jitter, cfg.lateral_jitter)
    y = rng.uniform(-cfg.vertical_jitter, cfg.vertical_jitter)
    return pose + np.array([x, y, z])


def _sample_root_rotation(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    yaw = rng.uniform(-cfg.root_yaw_range, cfg.root_yaw_range)
    tilt = rng.uniform(-cfg.root_tilt_range, cfg.root_tilt_range, size=2)
    return _rot_xyz(tilt[0], yaw, tilt[1])


def generate_sample(
    cfg: SceneConfig,
    index: int,
    topology: SkeletonTopology | None = None,
    body: BodyModel | None = None,
    seed: int | None = None,
    max_attempts: int = 100,
) -> LabeledSample:
    """One labeled sample; deterministic in (cfg, seed, index).

    Poses whose joints do not all project inside the frame are rejected and
    resampled (bounded by ``max_attempts``) so every labeled joint has a
    well-defined raster context.
    """
    topology = topology or default_topology()
    body = body or default_body(topology)
    cam = cfg.camera()
    master = cfg.seed if seed is None else seed
    w, h = cam.resolution

    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence((master, index, attempt)))
        rot = _sample_root_rotation(cfg, rng)
        pose = sample_pose3d(
            rng,
            topology,
            angle_ranges=DEFAULT_ANGLE_RANGES_17 * cfg.angle_scale,
            root_rotation=rot,
        )
        joints = _place_pose(pose, cfg, rng)
        if np.any(joints[:, 2] <= 0.5):
            continue
        uv = project_points(joints, cam)
        margin_px = 1.0
        if (
            uv[:, 0].min() < margin_px
            or uv[:, 0].max() > w - 1 - margin_px
            or uv[:, 1].min() < margin_px
            or uv[:, 1].max() > h - 1 - margin_px
        ):
            continue

        depth = render_depth(joints, body, cam)
        visibility = compute_visibility(joints, depth, cam, cfg.visibility_margin)
        detection = simulate_detection(
            joints, visibility, cam, cfg, rng, depth=depth, frame_id=index
        )
        rel = root_center(joints * 1000.0, topology.root_index)
        return LabeledSample(
            gt_pose3d_camera=joints,
            gt_pose3d_rel=rel,
            detection=detection,
            depth=depth,
            visibility=visibility,
        )
    raise RuntimeError(
        f"sample {index}: no in-frame pose found in {max_attempts} attempts; "
        "widen the field of view or reduce jitter"
    )


def generate_dataset(
    cfg: SceneConfig,
    n_samples: int,
    seed: int | None = None,
    topology: SkeletonTopology | None = None,
    body: BodyModel | None = None,
) -> list[LabeledSample]:
    """n labeled samples with per-sample seeds derived from (seed, index)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    topology = topology or default_topology()
    body = body or default_body(topology)
    return [
        generate_sample(cfg, i, topology=topology, body=body, seed=seed)
        for i in range(n_samples)
    ]
