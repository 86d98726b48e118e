"""Rotation algebra, forward kinematics, analytic two-bone IK, contact labels.

Angles follow the package convention (see :mod:`motiondiff.motiondata.types`):
Euler channel order (Z, X, Y), intrinsic composition ``R = Rz @ Rx @ Ry``.
All position quantities are in skeleton units; speeds are units per frame.
"""

from __future__ import annotations

import numpy as np

from .types import MotionClip, SkeletonDef

__all__ = [
    "euler_zxy_to_matrix",
    "matrix_to_euler_zxy",
    "rot_y",
    "heading_of",
    "split_heading",
    "integrate_root",
    "forward_kinematics",
    "fk_with_rotations",
    "two_bone_ik",
    "detect_foot_contacts",
    "DEFAULT_HEIGHT_THRESH",
    "DEFAULT_SPEED_THRESH",
]

# Contact thresholds calibrated on the synthetic set: stance ankle height 0.02
# plus 10% of the 0.90 leg, and 5% of the mean root speed across gaits.
DEFAULT_HEIGHT_THRESH = 0.11
DEFAULT_SPEED_THRESH = 0.002


def euler_zxy_to_matrix(angles: np.ndarray) -> np.ndarray:
    """(..., 3) radians in (Z, X, Y) channel order -> (..., 3, 3) matrices."""
    angles = np.asarray(angles, dtype=np.float64)
    z, x, y = angles[..., 0], angles[..., 1], angles[..., 2]
    cz, sz = np.cos(z), np.sin(z)
    cx, sx = np.cos(x), np.sin(x)
    cy, sy = np.cos(y), np.sin(y)
    m = np.empty(angles.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = cz * cy - sz * sx * sy
    m[..., 0, 1] = -sz * cx
    m[..., 0, 2] = cz * sy + sz * sx * cy
    m[..., 1, 0] = sz * cy + cz * sx * sy
    m[..., 1, 1] = cz * cx
    m[..., 1, 2] = sz * sy - cz * sx * cy
    m[..., 2, 0] = -cx * sy
    m[..., 2, 1] = sx
    m[..., 2, 2] = cx * cy
    return m


def matrix_to_euler_zxy(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`euler_zxy_to_matrix`; principal X branch (-pi/2, pi/2)."""
    m = np.asarray(m, dtype=np.float64)
    sx = np.clip(m[..., 2, 1], -1.0, 1.0)
    x = np.arcsin(sx)
    near_gimbal = np.abs(sx) > 1.0 - 1e-9
    y = np.where(near_gimbal, 0.0, np.arctan2(-m[..., 2, 0], m[..., 2, 2]))
    z = np.where(
        near_gimbal,
        np.arctan2(m[..., 0, 2], m[..., 0, 0]) * np.sign(sx),
        np.arctan2(-m[..., 0, 1], m[..., 1, 1]),
    )
    return np.stack([z, x, y], axis=-1)


def rot_y(theta) -> np.ndarray:
    """Rotation about the vertical (Y) axis; accepts scalars or arrays."""
    theta = np.asarray(theta, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    m = np.zeros(theta.shape + (3, 3), dtype=np.float64)
    m[..., 0, 0] = c
    m[..., 0, 2] = s
    m[..., 1, 1] = 1.0
    m[..., 2, 0] = -s
    m[..., 2, 2] = c
    return m


def heading_of(m: np.ndarray) -> np.ndarray:
    """Yaw of a rotation matrix: planar angle of its forward (+Z) axis."""
    m = np.asarray(m, dtype=np.float64)
    fx, fz = m[..., 0, 2], m[..., 2, 2]
    planar = np.hypot(fx, fz)
    # Forward pointing straight up/down: fall back to the side (+X) axis.
    sx, sz = m[..., 0, 0], m[..., 2, 0]
    return np.where(planar > 1e-8, np.arctan2(fx, fz), np.arctan2(-sz, sx))


def split_heading(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``m = Ry(heading) @ residual``; returns (heading, residual)."""
    heading = heading_of(m)
    residual = np.swapaxes(rot_y(heading), -1, -2) @ m
    return heading, residual


def integrate_root(root: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integrate root channels from the origin.

    Frame k's velocity/yaw-rate describe motion from frame k to k+1; the last
    frame's entries are unused. Returns world positions (F, 3) and headings (F,).
    """
    root = np.asarray(root, dtype=np.float64)
    f = root.shape[0]
    heading = np.zeros(f)
    heading[1:] = np.cumsum(root[:-1, 3])
    pos = np.zeros((f, 3))
    pos[:, 1] = root[:, 2]
    c, s = np.cos(heading[:-1]), np.sin(heading[:-1])
    vx, vz = root[:-1, 0], root[:-1, 1]
    # world displacement of a heading-local (vx, vz) step
    dx = c * vx + s * vz
    dz = -s * vx + c * vz
    pos[1:, 0] = np.cumsum(dx)
    pos[1:, 2] = np.cumsum(dz)
    return pos, heading


def fk_with_rotations(
    skeleton: SkeletonDef, clip: MotionClip
) -> tuple[np.ndarray, np.ndarray]:
    """Forward kinematics returning positions (F, J, 3) and world rotations (F, J, 3, 3)."""
    rot = np.asarray(clip.rotations, dtype=np.float64)
    f, j = rot.shape[0], rot.shape[1]
    root_pos, heading = integrate_root(clip.root)
    local = euler_zxy_to_matrix(rot)  # (F, J, 3, 3)
    world_rot = np.empty_like(local)
    world_pos = np.empty((f, j, 3))
    for i, parent in enumerate(skeleton.parent_index):
        if parent == -1:
            world_rot[:, i] = rot_y(heading) @ local[:, i]
            world_pos[:, i] = root_pos
        else:
            world_rot[:, i] = world_rot[:, parent] @ local[:, i]
            world_pos[:, i] = world_pos[:, parent] + np.einsum(
                "fab,b->fa", world_rot[:, parent], skeleton.offsets[i]
            )
    return world_pos, world_rot


def forward_kinematics(skeleton: SkeletonDef, clip: MotionClip) -> np.ndarray:
    """World joint positions (F, J, 3) for a clip."""
    return fk_with_rotations(skeleton, clip)[0]


def _orthonormal_from(bone_dir: np.ndarray, hinge: np.ndarray) -> np.ndarray:
    """Rotation with +X along ``hinge`` and the bone pointing along local -Y."""
    x = hinge / np.linalg.norm(hinge)
    y = -bone_dir / np.linalg.norm(bone_dir)
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=-1)


def two_bone_ik(
    hip_pos: np.ndarray,
    parent_rot: np.ndarray,
    target: np.ndarray,
    pole: np.ndarray,
    l1: float,
    l2: float,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Analytic hip/knee solve placing the chain end at ``target``.

    Both bones rest along local -Y. The chain bends toward ``pole`` (world
    direction). Returns (hip_local_euler, knee_local_euler, clamped) where
    ``clamped`` reports an out-of-reach target pinned to maximum extension.
    Segment lengths are preserved exactly: the solve emits pure rotations.
    """
    d_vec = np.asarray(target, dtype=np.float64) - np.asarray(hip_pos, dtype=np.float64)
    d = float(np.linalg.norm(d_vec))
    lo, hi = abs(l1 - l2) + 1e-6, l1 + l2 - 1e-6
    d_use = min(max(d, lo), hi)
    clamped = abs(d_use - d) > 1e-9
    d_hat = d_vec / d if d > 1e-9 else np.array([0.0, -1.0, 0.0])

    hinge = np.cross(d_hat, pole)
    norm = np.linalg.norm(hinge)
    if norm < 1e-8:
        fallback = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(fallback, d_hat)) > 0.9:
            fallback = np.array([0.0, 0.0, 1.0])
        hinge = np.cross(d_hat, fallback)
        norm = np.linalg.norm(hinge)
    hinge = hinge / norm

    cos_hip = np.clip((l1 * l1 + d_use * d_use - l2 * l2) / (2.0 * l1 * d_use), -1.0, 1.0)
    phi = float(np.arccos(cos_hip))
    # Rodrigues rotation of d_hat about hinge by phi tilts the thigh toward pole.
    thigh = (
        d_hat * np.cos(phi)
        + np.cross(hinge, d_hat) * np.sin(phi)
        + hinge * np.dot(hinge, d_hat) * (1.0 - np.cos(phi))
    )
    knee_pos = l1 * thigh
    end = d_use * d_hat
    shin = (end - knee_pos) / l2

    hip_world = _orthonormal_from(thigh, hinge)
    knee_world = _orthonormal_from(shin, hinge)
    hip_local = np.asarray(parent_rot, dtype=np.float64).T @ hip_world
    knee_local = hip_world.T @ knee_world
    return matrix_to_euler_zxy(hip_local), matrix_to_euler_zxy(knee_local), clamped


def detect_foot_contacts(
    foot_positions: np.ndarray, height_thresh: float, speed_thresh: float
) -> np.ndarray:
    """Threshold world foot positions into {0, 1} contact labels.

    ``foot_positions`` is (F, feet, 3). A foot is in contact when it is both
    low (height below ``height_thresh``) and slow (frame-to-frame displacement
    below ``speed_thresh``; the first frame uses the forward difference).
    """
    p = np.asarray(foot_positions, dtype=np.float64)
    if height_thresh <= 0 or speed_thresh <= 0:
        raise ValueError("thresholds must be positive")
    heights = p[..., 1]
    speed = np.zeros(p.shape[:2])
    if p.shape[0] > 1:
        speed[1:] = np.linalg.norm(p[1:] - p[:-1], axis=-1)
        speed[0] = speed[1]
    return ((heights < height_thresh) & (speed < speed_thresh)).astype(np.float32)
