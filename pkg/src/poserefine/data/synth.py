"""Synthetic motion + simulated noisy estimator, the desk-scale data source.

Ground-truth sequences animate a fixed 17-joint kinematic tree (pelvis root)
with smooth band-limited joint-angle trajectories; bone lengths are constant
by construction since child offsets are only ever rotated.

The simulated estimator produces the two observable channels:

  * ``pose2d``: pinhole projection of the subject placed at the configured
    camera depth, normalised to [-1, 1] by image width, plus keypoint jitter;
  * ``noisy3d``: ground truth plus a structured per-joint Gaussian error.

The error is built so conditioning on (pose2d, noisy3d) has something real
to recover: a systematic depth term ``coupling * z`` pushes joints along the
camera axis in proportion to how far they sit from the body centre, and the
random part's scale grows with relative joint depth and differs per joint
(distal joints noisier). The root row is exactly zero, matching what a
root-relative estimator can get wrong (nothing).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ProjectionError, ShapeError
from .records import SequenceRecord

JOINT_NAMES = (
    "pelvis",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "spine", "thorax", "neck", "head",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_shoulder", "right_elbow", "right_wrist",
)
PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)
NUM_JOINTS = len(JOINT_NAMES)

# rest-pose child offsets in meters: x lateral, y down, z toward the camera
REST_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [-0.13, 0.0, 0.0], [0.0, 0.45, 0.0], [0.0, 0.45, 0.0],
    [0.13, 0.0, 0.0], [0.0, 0.45, 0.0], [0.0, 0.45, 0.0],
    [0.0, -0.25, 0.0], [0.0, -0.25, 0.0], [0.0, -0.12, 0.0], [0.0, -0.12, 0.0],
    [0.16, -0.02, 0.0], [0.28, 0.0, 0.0], [0.25, 0.0, 0.0],
    [-0.16, -0.02, 0.0], [-0.28, 0.0, 0.0], [-0.25, 0.0, 0.0],
])

# per-joint noise scale multipliers; the root is error-free by definition
SIGMA_FACTORS = (
    0.0,
    0.7, 1.0, 1.3,
    0.7, 1.0, 1.3,
    0.6, 0.7, 0.9, 1.1,
    0.8, 1.1, 1.5,
    0.8, 1.1, 1.5,
)

MIN_CAMERA_DEPTH = 0.1
ANGLE_COMPONENTS = 2


@dataclass(frozen=True)
class SynthConfig:
    sequences: int = 200
    frames: int = 27
    joints: int = NUM_JOINTS
    fps: float = 50.0
    bone_scale: float = 1.0
    motion_band_hz: tuple = (0.2, 1.2)
    motion_amplitude_rad: float = 0.5
    focal_px: float = 1150.0
    principal_px: tuple = (500.0, 500.0)
    image_size_px: tuple = (1000, 1000)
    subject_depth_m: float = 4.0
    noise_sigma_m: float = 0.02
    sigma_joint_factors: tuple = SIGMA_FACTORS
    depth_coupling: float = 0.4
    jitter_sigma: float = 0.004
    noise_bias_m: float = 0.0

    def __post_init__(self):
        if self.joints != NUM_JOINTS:
            raise ConfigurationError(
                f"the skeleton is fixed at {NUM_JOINTS} joints, got joints={self.joints}"
            )
        if self.sequences < 1 or self.frames < 1:
            raise ConfigurationError("sequences and frames must be >= 1")
        if self.fps <= 0:
            raise ConfigurationError(f"fps must be > 0, got {self.fps}")
        if self.bone_scale <= 0:
            raise ConfigurationError(f"bone_scale must be > 0, got {self.bone_scale}")
        lo, hi = self.motion_band_hz
        if lo < 0 or hi < lo:
            raise ConfigurationError(f"invalid motion band {self.motion_band_hz}")
        if self.focal_px <= 0:
            raise ConfigurationError(f"focal_px must be > 0, got {self.focal_px}")
        if self.subject_depth_m <= 0:
            raise ConfigurationError(
                f"subject_depth_m must be > 0, got {self.subject_depth_m}"
            )
        if self.noise_sigma_m < 0 or self.jitter_sigma < 0:
            raise ConfigurationError("noise sigmas must be >= 0")
        if len(self.sigma_joint_factors) != NUM_JOINTS:
            raise ConfigurationError(
                f"sigma_joint_factors must have {NUM_JOINTS} entries"
            )
        if min(self.sigma_joint_factors) < 0:
            raise ConfigurationError("sigma_joint_factors must be >= 0")


def _euler_rotations(angles: np.ndarray) -> np.ndarray:
    """Stack of Rz @ Ry @ Rx rotation matrices for (N, 3) Euler angles."""
    ax, ay, az = angles[:, 0], angles[:, 1], angles[:, 2]
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rot = np.empty((angles.shape[0], 3, 3))
    rot[:, 0, 0] = cz * cy
    rot[:, 0, 1] = cz * sy * sx - sz * cx
    rot[:, 0, 2] = cz * sy * cx + sz * sx
    rot[:, 1, 0] = sz * cy
    rot[:, 1, 1] = sz * sy * sx + cz * cx
    rot[:, 1, 2] = sz * sy * cx - cz * sx
    rot[:, 2, 0] = -sy
    rot[:, 2, 1] = cy * sx
    rot[:, 2, 2] = cy * cx
    return rot


def _generate_sequence(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Forward kinematics under band-limited random joint-angle signals."""
    n = config.frames
    moving = NUM_JOINTS - 1
    lo, hi = config.motion_band_hz
    freqs = rng.uniform(lo, hi, (moving, 3, ANGLE_COMPONENTS))
    phases = rng.uniform(0.0, 2.0 * np.pi, (moving, 3, ANGLE_COMPONENTS))
    amps = (
        config.motion_amplitude_rad
        / ANGLE_COMPONENTS
        * rng.uniform(0.3, 1.0, (moving, 3, ANGLE_COMPONENTS))
    )
    tsec = np.arange(n) / config.fps
    # angles[n, j-1, axis] = sum_m amp * sin(2 pi f t + phase)
    angles = np.einsum(
        "jam,njam->nja",
        amps,
        np.sin(2.0 * np.pi * freqs[None] * tsec[:, None, None, None] + phases[None]),
    )

    positions = np.zeros((n, NUM_JOINTS, 3))
    offsets = REST_OFFSETS * config.bone_scale
    for j in range(1, NUM_JOINTS):
        rot = _euler_rotations(angles[:, j - 1, :])
        positions[:, j, :] = positions[:, PARENTS[j], :] + rot @ offsets[j]
    return positions


def generate_gt_sequences(config: SynthConfig, rng: np.random.Generator):
    """Generate ``config.sequences`` root-relative ground-truth sequences."""
    return [_generate_sequence(config, rng) for _ in range(config.sequences)]


def normalize_2d(raw_px: np.ndarray, image_size) -> np.ndarray:
    """Map pixel coordinates to [-1, 1] by image width (aspect-preserving)."""
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ConfigurationError(f"image size must be positive, got {image_size}")
    raw_px = np.asarray(raw_px, dtype=float)
    return (2.0 * raw_px - np.array([width, height])) / width


def root_relative(x: np.ndarray, root_index: int = 0) -> np.ndarray:
    """Subtract the root joint per frame; idempotent."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ShapeError(f"expected (N, J, 3), got {x.shape}")
    return x - x[:, root_index : root_index + 1, :]


def simulate_estimator(
    gt3d: np.ndarray, config: SynthConfig, rng: np.random.Generator
):
    """Simulate (pose2d, noisy3d) observations of a ground-truth sequence."""
    gt3d = np.asarray(gt3d, dtype=float)
    if gt3d.ndim != 3 or gt3d.shape[1:] != (NUM_JOINTS, 3):
        raise ShapeError(f"expected (N, {NUM_JOINTS}, 3) ground truth, got {gt3d.shape}")
    if not np.all(np.isfinite(gt3d)):
        raise ShapeError("ground truth contains non-finite values")

    cam = gt3d + np.array([0.0, 0.0, config.subject_depth_m])
    depth = cam[..., 2]
    if np.any(depth <= MIN_CAMERA_DEPTH):
        frame, joint = np.argwhere(depth <= MIN_CAMERA_DEPTH)[0]
        raise ProjectionError(
            f"joint {joint} in frame {frame} is at camera depth {depth[frame, joint]:.3f} m"
        )
    cx, cy = config.principal_px
    px = np.stack(
        [
            config.focal_px * cam[..., 0] / depth + cx,
            config.focal_px * cam[..., 1] / depth + cy,
        ],
        axis=-1,
    )
    pose2d = normalize_2d(px, config.image_size_px)
    pose2d = pose2d + config.jitter_sigma * rng.standard_normal(pose2d.shape)

    rel_depth = gt3d[..., 2] / config.subject_depth_m
    factors = np.asarray(config.sigma_joint_factors)
    sigma = np.maximum(
        config.noise_sigma_m
        * factors[None, :]
        * (1.0 + config.depth_coupling * rel_depth),
        0.0,
    )
    error = sigma[..., None] * rng.standard_normal(gt3d.shape)
    error[..., 2] += config.depth_coupling * gt3d[..., 2]
    error[:, 1:, 2] += config.noise_bias_m

    noisy3d = root_relative(gt3d + error)
    return pose2d, noisy3d


def generate_dataset(
    config: SynthConfig, rng: np.random.Generator, id_prefix: str = "seq"
) -> list[SequenceRecord]:
    """Generate sequences and their simulated observations as records."""
    records = []
    for i in range(config.sequences):
        gt = _generate_sequence(config, rng)
        pose2d, noisy3d = simulate_estimator(gt, config, rng)
        records.append(
            SequenceRecord(
                id=f"{id_prefix}{i:04d}", pose2d=pose2d, noisy3d=noisy3d, gt3d=gt
            )
        )
    return records
