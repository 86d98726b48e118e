"""Windowing, normalization and the on-disk dataset container.

Container layout (all integers and floats little-endian):

    magic   4 bytes  b"MDL1"
    version u32      currently 1
    N, F, J, FEET    u32 each
    rotations        float32[N*F*J*3]   row-major
    root             float32[N*F*4]
    foot_contact     float32[N*F*FEET]
    content          float32[N]
    style            float32[N]

A JSON sidecar at ``<path>.json`` carries label names, the skeleton, the
frame time and the normalization statistics. Clips inside the container are
stored z-normalized (rotations and root channels); foot contacts stay {0, 1}.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .bvh import DEFAULT_FRAME_TIME, RawMotion, clip_from_frames
from .types import WINDOW_LEN, DatasetStats, MotionClip, SkeletonDef

__all__ = [
    "compute_stats",
    "normalize_clips",
    "denormalize_clip",
    "window_clips",
    "window_and_normalize",
    "MotionDataset",
    "TRAIN_STRIDE",
    "EVAL_STRIDE",
]

_MAGIC = b"MDL1"
_VERSION = 1

TRAIN_STRIDE = 16
EVAL_STRIDE = 32


def compute_stats(clips: list[MotionClip]) -> DatasetStats:
    """Per-channel mean/std over all clips and frames (std floored at 1e-6)."""
    if not clips:
        raise DataError("cannot compute stats over an empty clip list")
    rot = np.concatenate([c.rotations for c in clips], axis=0).astype(np.float64)
    root = np.concatenate([c.root for c in clips], axis=0).astype(np.float64)
    return DatasetStats(
        rot_mean=rot.mean(axis=0),
        rot_std=rot.std(axis=0),
        root_mean=root.mean(axis=0),
        root_std=root.std(axis=0),
    )


def normalize_clips(
    clips: list[MotionClip], stats: DatasetStats | None = None
) -> tuple[list[MotionClip], DatasetStats]:
    """Z-normalize rotations and root channels; contacts are left untouched."""
    if stats is None:
        stats = compute_stats(clips)
    out = []
    for c in clips:
        out.append(
            MotionClip(
                rotations=(c.rotations.astype(np.float64) - stats.rot_mean) / stats.rot_std,
                root=(c.root.astype(np.float64) - stats.root_mean) / stats.root_std,
                foot_contact=c.foot_contact.copy(),
                content=c.content,
                style=c.style,
            )
        )
    return out, stats


def denormalize_clip(clip: MotionClip, stats: DatasetStats) -> MotionClip:
    return MotionClip(
        rotations=clip.rotations.astype(np.float64) * stats.rot_std + stats.rot_mean,
        root=clip.root.astype(np.float64) * stats.root_std + stats.root_mean,
        foot_contact=clip.foot_contact.copy(),
        content=clip.content,
        style=clip.style,
    )


def window_clips(
    raw: RawMotion,
    skeleton: SkeletonDef,
    stride: int = TRAIN_STRIDE,
    height_thresh: float | None = None,
    speed_thresh: float | None = None,
) -> list[MotionClip]:
    """Cut raw frames into 32-frame windows with detected contact labels."""
    f = raw.num_frames
    if f < WINDOW_LEN:
        raise DataError(f"need at least {WINDOW_LEN} frames, got {f}")
    if stride < 1:
        raise DataError("stride must be >= 1")
    windows = []
    for start in range(0, f - WINDOW_LEN + 1, stride):
        piece = RawMotion(
            root_positions=raw.root_positions[start : start + WINDOW_LEN],
            rotations=raw.rotations[start : start + WINDOW_LEN],
            frame_time=raw.frame_time,
        )
        windows.append(clip_from_frames(skeleton, piece, height_thresh, speed_thresh))
    return windows


def window_and_normalize(
    raw: RawMotion,
    skeleton: SkeletonDef,
    stats: DatasetStats | None = None,
    stride: int = TRAIN_STRIDE,
    height_thresh: float | None = None,
    speed_thresh: float | None = None,
) -> tuple[list[MotionClip], DatasetStats]:
    """Cut raw frames into 32-frame windows, label contacts, z-normalize.

    Contacts are detected on the un-normalized windows. When ``stats`` is not
    supplied it is computed from the produced windows.
    """
    windows = window_clips(raw, skeleton, stride, height_thresh, speed_thresh)
    return normalize_clips(windows, stats)


@dataclass
class MotionDataset:
    """A persisted set of normalized clips plus everything needed to use them."""

    clips: list[MotionClip]
    stats: DatasetStats
    skeleton: SkeletonDef
    content_names: list[str]
    style_names: list[str]
    frame_time: float = DEFAULT_FRAME_TIME

    def __len__(self) -> int:
        return len(self.clips)

    @property
    def num_contents(self) -> int:
        return len(self.content_names)

    @property
    def num_styles(self) -> int:
        return len(self.style_names)

    def _split(self) -> tuple[list[int], list[int]]:
        # fixed-seed permutation so the held-out third is decorrelated from any
        # label ordering in the clip list
        perm = np.random.default_rng(0x5EED).permutation(len(self.clips))
        cut = len(self.clips) // 3
        held = sorted(int(i) for i in perm[:cut])
        train = sorted(int(i) for i in perm[cut:])
        return train, held

    def train_indices(self) -> list[int]:
        """Deterministic two-thirds training split (every index not held out)."""
        return self._split()[0]

    def heldout_indices(self) -> list[int]:
        return self._split()[1]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        n = len(self.clips)
        if n == 0:
            raise DataError("refusing to save an empty dataset")
        f = self.clips[0].num_frames
        j = self.clips[0].num_joints
        feet = self.clips[0].num_feet
        for c in self.clips:
            if (c.num_frames, c.num_joints, c.num_feet) != (f, j, feet):
                raise DataError("all clips in a dataset must share one shape")
        rot = np.stack([c.rotations for c in self.clips]).astype("<f4")
        root = np.stack([c.root for c in self.clips]).astype("<f4")
        foot = np.stack([c.foot_contact for c in self.clips]).astype("<f4")
        content = np.asarray([c.content for c in self.clips], dtype="<f4")
        style = np.asarray([c.style for c in self.clips], dtype="<f4")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<5I", _VERSION, n, f, j, feet))
            for arr in (rot, root, foot, content, style):
                fh.write(arr.tobytes())
        sidecar = {
            "format": _MAGIC.decode(),
            "version": _VERSION,
            "content_names": self.content_names,
            "style_names": self.style_names,
            "frame_time": self.frame_time,
            "stats": self.stats.to_dict(),
            "skeleton": self.skeleton.to_dict(),
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "MotionDataset":
        path = Path(path)
        if not path.exists():
            raise DataError(f"dataset not found: {path}")
        sidecar_path = Path(str(path) + ".json")
        if not sidecar_path.exists():
            raise DataError(f"dataset sidecar not found: {sidecar_path}")
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != _MAGIC:
            raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
        version, n, f, j, feet = struct.unpack_from("<5I", blob, 4)
        if version != _VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        offset = 4 + 20
        sizes = [n * f * j * 3, n * f * 4, n * f * feet, n, n]
        expected = offset + 4 * sum(sizes)
        if len(blob) != expected:
            raise DataError(f"{path}: size {len(blob)} does not match header ({expected})")
        arrays = []
        for count in sizes:
            arrays.append(np.frombuffer(blob, dtype="<f4", count=count, offset=offset))
            offset += 4 * count
        rot = arrays[0].reshape(n, f, j, 3)
        root = arrays[1].reshape(n, f, 4)
        foot = arrays[2].reshape(n, f, feet)
        content = arrays[3].astype(np.int64)
        style = arrays[4].astype(np.int64)
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        clips = [
            MotionClip(
                rotations=rot[i].copy(),
                root=root[i].copy(),
                foot_contact=foot[i].copy(),
                content=int(content[i]),
                style=int(style[i]),
            )
            for i in range(n)
        ]
        return cls(
            clips=clips,
            stats=DatasetStats.from_dict(sidecar["stats"]),
            skeleton=SkeletonDef.from_dict(sidecar["skeleton"]),
            content_names=list(sidecar["content_names"]),
            style_names=list(sidecar["style_names"]),
            frame_time=float(sidecar["frame_time"]),
        )
