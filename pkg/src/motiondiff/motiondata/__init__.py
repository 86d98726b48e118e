"""Motion ingestion and representation: BVH, kinematics, synthesis, datasets."""

from .bvh import RawMotion, clip_from_frames, parse_bvh, serialize_bvh
from .dataset import (
    EVAL_STRIDE,
    TRAIN_STRIDE,
    MotionDataset,
    compute_stats,
    denormalize_clip,
    normalize_clips,
    window_and_normalize,
    window_clips,
)
from .kinematics import (
    DEFAULT_HEIGHT_THRESH,
    DEFAULT_SPEED_THRESH,
    detect_foot_contacts,
    forward_kinematics,
    two_bone_ik,
)
from .synthetic import content_names, generate_synthetic, style_names
from .types import WINDOW_LEN, DatasetStats, MotionClip, SkeletonDef, default_skeleton

__all__ = [
    "RawMotion",
    "clip_from_frames",
    "parse_bvh",
    "serialize_bvh",
    "MotionDataset",
    "compute_stats",
    "normalize_clips",
    "denormalize_clip",
    "window_and_normalize",
    "window_clips",
    "TRAIN_STRIDE",
    "EVAL_STRIDE",
    "detect_foot_contacts",
    "forward_kinematics",
    "two_bone_ik",
    "DEFAULT_HEIGHT_THRESH",
    "DEFAULT_SPEED_THRESH",
    "content_names",
    "generate_synthetic",
    "style_names",
    "WINDOW_LEN",
    "DatasetStats",
    "MotionClip",
    "SkeletonDef",
    "default_skeleton",
]
