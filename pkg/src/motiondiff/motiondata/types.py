"""Core motion data types: skeleton definition, motion clips, dataset statistics.

Conventions used throughout:

* Rotations are per-joint Euler angles in radians, channel order (Z, X, Y),
  composed intrinsically as ``R = Rz @ Rx @ Ry`` (BVH ``Zrotation Xrotation
  Yrotation``). On disk (BVH) angles are degrees; in memory always radians.
* The root joint's rotation excludes the yaw heading: heading lives in the
  root trajectory channels, the remaining lean/tilt in ``rotations[:, 0]``.
* Root trajectory channels per frame: ``[vx, vz, height, yaw_rate]`` where
  ``(vx, vz)`` is the planar velocity in the heading-local frame (units per
  frame), ``height`` the root world height, ``yaw_rate`` the heading change to
  the next frame in radians per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SkeletonDef", "MotionClip", "DatasetStats", "default_skeleton", "WINDOW_LEN"]

WINDOW_LEN = 32  # fixed clip length for training and generation

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class SkeletonDef:
    """Joint hierarchy with rest offsets.

    ``parent_index[i] == -1`` marks the single root; parents precede children
    so a plain forward loop walks the hierarchy top-down.
    """

    joint_names: list[str]
    parent_index: list[int]
    offsets: np.ndarray  # (J, 3)
    foot_joint_indices: list[int]

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parent_index) != n:
            raise ValueError("parent_index length must match joint_names")
        offsets = np.asarray(self.offsets, dtype=np.float64)
        if offsets.shape != (n, 3):
            raise ValueError(f"offsets must be ({n}, 3), got {offsets.shape}")
        object.__setattr__(self, "offsets", offsets)
        roots = [i for i, p in enumerate(self.parent_index) if p == -1]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        for i, p in enumerate(self.parent_index):
            if p != -1 and not (0 <= p < i):
                raise ValueError(f"parent_index[{i}]={p} is not topologically ordered")
        for f in self.foot_joint_indices:
            if not (0 <= f < n):
                raise ValueError(f"foot joint index {f} out of range")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_feet(self) -> int:
        return len(self.foot_joint_indices)

    def to_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "parent_index": list(self.parent_index),
            "offsets": self.offsets.tolist(),
            "foot_joint_indices": list(self.foot_joint_indices),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonDef":
        return cls(
            joint_names=list(d["joint_names"]),
            parent_index=[int(p) for p in d["parent_index"]],
            offsets=np.asarray(d["offsets"], dtype=np.float64),
            foot_joint_indices=[int(f) for f in d["foot_joint_indices"]],
        )


@dataclass
class MotionClip:
    """A motion window: joint rotations, root trajectory, foot contacts, labels.

    Training and generated clips are always ``WINDOW_LEN`` frames; intermediate
    clips (e.g. a freshly parsed BVH before windowing) may be any length >= 1.
    Values are stored in physical units (radians, skeleton units); normalized
    copies exist only as tensors inside training code.
    """

    rotations: np.ndarray  # (F, J, 3) radians, channel order (Z, X, Y)
    root: np.ndarray  # (F, 4): vx, vz, height, yaw_rate
    foot_contact: np.ndarray  # (F, num_feet) in {0, 1}
    content: int = 0
    style: int = 0

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float32)
        self.root = np.asarray(self.root, dtype=np.float32)
        self.foot_contact = np.asarray(self.foot_contact, dtype=np.float32)
        if self.rotations.ndim != 3 or self.rotations.shape[2] != 3:
            raise ValueError(f"rotations must be (F, J, 3), got {self.rotations.shape}")
        f = self.rotations.shape[0]
        if self.root.shape != (f, 4):
            raise ValueError(f"root must be ({f}, 4), got {self.root.shape}")
        if self.foot_contact.ndim != 2 or self.foot_contact.shape[0] != f:
            raise ValueError(f"foot_contact must be ({f}, feet), got {self.foot_contact.shape}")
        if not np.isfinite(self.rotations).all() or not np.isfinite(self.root).all():
            raise ValueError("clip contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.rotations.shape[0]

    @property
    def num_joints(self) -> int:
        return self.rotations.shape[1]

    @property
    def num_feet(self) -> int:
        return self.foot_contact.shape[1]

    def copy(self) -> "MotionClip":
        return MotionClip(
            rotations=self.rotations.copy(),
            root=self.root.copy(),
            foot_contact=self.foot_contact.copy(),
            content=self.content,
            style=self.style,
        )


@dataclass
class DatasetStats:
    """Per-channel z-normalization statistics for rotations and root channels.

    Kept in float64: normalization must cancel the mean exactly even for
    channels whose variation is tiny relative to their offset.
    """

    rot_mean: np.ndarray  # (J, 3)
    rot_std: np.ndarray  # (J, 3), floored
    root_mean: np.ndarray  # (4,)
    root_std: np.ndarray  # (4,), floored

    def __post_init__(self):
        self.rot_mean = np.asarray(self.rot_mean, dtype=np.float64)
        self.rot_std = np.maximum(np.asarray(self.rot_std, dtype=np.float64), STD_FLOOR)
        self.root_mean = np.asarray(self.root_mean, dtype=np.float64)
        self.root_std = np.maximum(np.asarray(self.root_std, dtype=np.float64), STD_FLOOR)

    def to_dict(self) -> dict:
        return {
            "rot_mean": self.rot_mean.tolist(),
            "rot_std": self.rot_std.tolist(),
            "root_mean": self.root_mean.tolist(),
            "root_std": self.root_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        return cls(
            rot_mean=np.asarray(d["rot_mean"], dtype=np.float64),
            rot_std=np.asarray(d["rot_std"], dtype=np.float64),
            root_mean=np.asarray(d["root_mean"], dtype=np.float64),
            root_std=np.asarray(d["root_std"], dtype=np.float64),
        )


def default_skeleton() -> SkeletonDef:
    """The 17-joint humanoid used by the synthetic generator.

    Legs are hip-knee-ankle chains (0.45 + 0.45 units) so the ankles rest on the
    ground when the root stands at height 0.92.
    """
    names = [
        "Hips",
        "Spine", "Chest", "Neck", "Head",
        "LeftShoulder", "LeftElbow", "LeftWrist",
        "RightShoulder", "RightElbow", "RightWrist",
        "LeftHip", "LeftKnee", "LeftAnkle",
        "RightHip", "RightKnee", "RightAnkle",
    ]
    parents = [-1, 0, 1, 2, 3, 2, 5, 6, 2, 8, 9, 0, 11, 12, 0, 14, 15]
    offsets = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.22, 0.0],
            [0.0, 0.22, 0.0],
            [0.0, 0.14, 0.0],
            [0.0, 0.12, 0.0],
            [0.20, 0.10, 0.0],
            [0.0, -0.28, 0.0],
            [0.0, -0.26, 0.0],
            [-0.20, 0.10, 0.0],
            [0.0, -0.28, 0.0],
            [0.0, -0.26, 0.0],
            [0.10, -0.02, 0.0],
            [0.0, -0.45, 0.0],
            [0.0, -0.45, 0.0],
            [-0.10, -0.02, 0.0],
            [0.0, -0.45, 0.0],
            [0.0, -0.45, 0.0],
        ],
        dtype=np.float64,
    )
    return SkeletonDef(
        joint_names=names,
        parent_index=parents,
        offsets=offsets,
        foot_joint_indices=[13, 16],
    )
