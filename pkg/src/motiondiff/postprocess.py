"""Output cleanup: temporal Gaussian smoothing and contact-preserving leg IK."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .motiondata import MotionClip, SkeletonDef
from .motiondata.kinematics import fk_with_rotations, two_bone_ik

__all__ = ["gaussian_filter", "ik_foot_cleanup", "IkReport", "gaussian_kernel"]

DEFAULT_FILTER_SIGMA = 1.0

_BLEND_FRAMES = 3
_STATIONARY_TOL = 1e-7


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized Gaussian taps with radius ceil(3*sigma)."""
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_filter(clip: MotionClip, sigma_frames: float = DEFAULT_FILTER_SIGMA) -> MotionClip:
    """Convolve each rotation channel along time with a normalized Gaussian.

    Boundaries are handled by reflection; root channels, contacts and labels
    pass through untouched. ``sigma_frames == 0`` is the identity.
    """
    if sigma_frames < 0:
        raise ValueError("sigma_frames must be >= 0")
    out = clip.copy()
    if sigma_frames == 0:
        return out
    kernel = gaussian_kernel(sigma_frames)
    radius = (len(kernel) - 1) // 2
    f = clip.num_frames
    rot = clip.rotations.astype(np.float64).reshape(f, -1)
    pad = np.pad(rot, ((radius, radius), (0, 0)), mode="reflect")
    smoothed = np.empty_like(rot)
    for c in range(rot.shape[1]):
        smoothed[:, c] = np.convolve(pad[:, c], kernel, mode="valid")
    out.rotations = smoothed.reshape(clip.rotations.shape).astype(np.float32)
    return out


@dataclass
class IkReport:
    adjusted_frames: int = 0
    clamped_frames: int = 0


def _leg_chains(skeleton: SkeletonDef) -> list[tuple[int, int, int]]:
    chains = []
    for ankle in skeleton.foot_joint_indices:
        knee = skeleton.parent_index[ankle]
        hip = skeleton.parent_index[knee] if knee >= 0 else -1
        if knee < 0 or hip < 0:
            raise ValueError(f"foot joint {ankle} has no hip-knee-ankle chain")
        chains.append((hip, knee, ankle))
    return chains


def ik_foot_cleanup(
    clip: MotionClip,
    skeleton: SkeletonDef,
    contacts: np.ndarray | None = None,
) -> tuple[MotionClip, IkReport]:
    """Pin each foot to its run-mean position during contact runs.

    Every maximal run of 1s in ``contacts`` (default: the clip's own labels)
    gets one pin target; frames up to 3 outside a run blend between the pin
    and the original trajectory. Legs are re-posed by analytic two-bone IK, so
    bone lengths are exact; joints outside the hip-knee-ankle chains are never
    touched, and frames already on target are skipped entirely. Unreachable
    targets are clamped to full leg extension and counted in the report.
    """
    if contacts is None:
        contacts = clip.foot_contact
    contacts = np.asarray(contacts)
    f = clip.num_frames
    if contacts.shape != (f, skeleton.num_feet):
        raise ValueError(f"contacts must be ({f}, {skeleton.num_feet})")

    positions, world_rot = fk_with_rotations(skeleton, clip)
    root_index = skeleton.parent_index.index(-1)
    out = clip.copy()
    report = IkReport()

    for foot_col, (hip, knee, ankle) in enumerate(_leg_chains(skeleton)):
        l1 = float(np.linalg.norm(skeleton.offsets[knee]))
        l2 = float(np.linalg.norm(skeleton.offsets[ankle]))
        orig = positions[:, ankle]

        weights = np.zeros(f)
        pins = np.zeros((f, 3))
        mask = contacts[:, foot_col] > 0.5
        k = 0
        while k < f:
            if not mask[k]:
                k += 1
                continue
            start = k
            while k < f and mask[k]:
                k += 1
            end = k  # run is [start, end)
            pin = orig[start:end].mean(axis=0)
            for i in range(start, end):
                if 1.0 > weights[i]:
                    weights[i], pins[i] = 1.0, pin
            for d in range(1, _BLEND_FRAMES + 1):
                w = (_BLEND_FRAMES + 1 - d) / (_BLEND_FRAMES + 1)
                for i in (start - d, end - 1 + d):
                    if 0 <= i < f and w > weights[i]:
                        weights[i], pins[i] = w, pin

        hip_parent = skeleton.parent_index[hip]
        for i in range(f):
            if weights[i] == 0.0:
                continue
            target = weights[i] * pins[i] + (1.0 - weights[i]) * orig[i]
            if np.linalg.norm(target - orig[i]) <= _STATIONARY_TOL:
                continue
            hip_pos = positions[i, hip]
            parent_rot = world_rot[i, hip_parent]
            pole = world_rot[i, root_index] @ np.array([0.0, 0.0, 1.0])
            hip_e, knee_e, clamped = two_bone_ik(hip_pos, parent_rot, target, pole, l1, l2)
            out.rotations[i, hip] = hip_e
            out.rotations[i, knee] = knee_e
            report.adjusted_frames += 1
            report.clamped_frames += int(clamped)

    return out, report
