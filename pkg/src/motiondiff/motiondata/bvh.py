"""BVH text format support.

On disk angles are degrees and the root carries absolute translation; in
memory angles are radians and root motion is decomposed into trajectory
channels (see :mod:`motiondiff.motiondata.types`). Serialization reconstructs
the root translation by integrating the trajectory from the origin, so
absolute world placement is not round-tripped (channel values are).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BvhParseError
from .kinematics import (
    euler_zxy_to_matrix,
    integrate_root,
    matrix_to_euler_zxy,
    rot_y,
    split_heading,
)
from .types import MotionClip, SkeletonDef

__all__ = ["RawMotion", "parse_bvh", "serialize_bvh", "clip_from_frames"]

_ROT_CHANNELS = ("Zrotation", "Xrotation", "Yrotation")
_POS_CHANNELS = ("Xposition", "Yposition", "Zposition")
_FOOT_NAME_HINTS = ("ankle", "foot", "toe")

DEFAULT_FRAME_TIME = 1.0 / 30.0


@dataclass
class RawMotion:
    """Frames exactly as parsed: absolute root positions and full rotations.

    ``rotations[:, 0]`` still contains the root's heading (unlike
    :class:`MotionClip`); use :func:`clip_from_frames` to decompose.
    """

    root_positions: np.ndarray  # (F, 3) world units
    rotations: np.ndarray  # (F, J, 3) radians, canonical (Z, X, Y) order
    frame_time: float

    @property
    def num_frames(self) -> int:
        return self.root_positions.shape[0]


def _axis_rotation(channel: str, radians: np.ndarray) -> np.ndarray:
    zero = np.zeros_like(radians)
    if channel == "Zrotation":
        e = np.stack([radians, zero, zero], axis=-1)
    elif channel == "Xrotation":
        e = np.stack([zero, radians, zero], axis=-1)
    elif channel == "Yrotation":
        e = np.stack([zero, zero, radians], axis=-1)
    else:
        raise ValueError(channel)
    return euler_zxy_to_matrix(e)


class _Cursor:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.i = 0

    def next_tokens(self) -> tuple[int, list[str]]:
        while self.i < len(self.lines):
            line_no = self.i + 1
            tokens = self.lines[self.i].split()
            self.i += 1
            if tokens:
                return line_no, tokens
        return len(self.lines), []

    def peek_tokens(self) -> tuple[int, list[str]]:
        save = self.i
        line_no, tokens = self.next_tokens()
        self.i = save
        return line_no, tokens


def parse_bvh(text: str) -> tuple[SkeletonDef, RawMotion]:
    """Parse BVH text into a skeleton and raw frames.

    Raises :class:`BvhParseError` (with the offending line number) on malformed
    hierarchy, channel/row width mismatch, frame-count mismatch or non-numeric
    frame data. Returned rotations are radians in canonical (Z, X, Y) order;
    files with other rotation orders are converted through rotation matrices.
    """
    cur = _Cursor(text)
    line_no, tokens = cur.next_tokens()
    if tokens[:1] != ["HIERARCHY"]:
        raise BvhParseError(line_no, "expected HIERARCHY")

    names: list[str] = []
    parents: list[int] = []
    offsets: list[list[float]] = []
    channels: list[list[str]] = []

    stack: list[int] = []
    end_site_depth = 0
    motion_line = None

    while True:
        line_no, tokens = cur.next_tokens()
        if not tokens:
            raise BvhParseError(line_no, "unexpected end of file inside HIERARCHY")
        word = tokens[0]
        if word in ("ROOT", "JOINT"):
            if len(tokens) < 2:
                raise BvhParseError(line_no, f"{word} requires a name")
            if word == "ROOT" and names:
                raise BvhParseError(line_no, "multiple ROOT declarations")
            if word == "JOINT" and not stack:
                raise BvhParseError(line_no, "JOINT outside of a ROOT block")
            parent = stack[-1] if stack else -1
            names.append(" ".join(tokens[1:]))
            parents.append(parent)
            offsets.append([0.0, 0.0, 0.0])
            channels.append([])
            ln, nxt = cur.next_tokens()
            if nxt[:1] != ["{"]:
                raise BvhParseError(ln, f"expected '{{' after {word}")
            stack.append(len(names) - 1)
        elif word == "End" and tokens[1:2] == ["Site"]:
            ln, nxt = cur.next_tokens()
            if nxt[:1] != ["{"]:
                raise BvhParseError(ln, "expected '{' after End Site")
            end_site_depth += 1
        elif word == "OFFSET":
            if len(tokens) != 4:
                raise BvhParseError(line_no, "OFFSET requires exactly 3 values")
            try:
                vals = [float(v) for v in tokens[1:4]]
            except ValueError:
                raise BvhParseError(line_no, "non-numeric OFFSET value") from None
            if end_site_depth == 0:
                if not stack:
                    raise BvhParseError(line_no, "OFFSET outside of a joint block")
                offsets[stack[-1]] = vals
        elif word == "CHANNELS":
            if end_site_depth:
                raise BvhParseError(line_no, "CHANNELS inside End Site")
            if not stack:
                raise BvhParseError(line_no, "CHANNELS outside of a joint block")
            try:
                n = int(tokens[1])
            except (IndexError, ValueError):
                raise BvhParseError(line_no, "CHANNELS requires a count") from None
            chan = tokens[2:]
            if len(chan) != n:
                raise BvhParseError(line_no, f"CHANNELS declared {n} but lists {len(chan)}")
            for c in chan:
                if c not in _ROT_CHANNELS and c not in _POS_CHANNELS:
                    raise BvhParseError(line_no, f"unknown channel {c!r}")
            channels[stack[-1]] = chan
        elif word == "}":
            if end_site_depth:
                end_site_depth -= 1
            elif stack:
                stack.pop()
            else:
                raise BvhParseError(line_no, "unbalanced '}'")
        elif word == "MOTION":
            if stack or end_site_depth:
                raise BvhParseError(line_no, "MOTION before hierarchy was closed")
            if not names:
                raise BvhParseError(line_no, "MOTION without any joints")
            motion_line = line_no
            break
        else:
            raise BvhParseError(line_no, f"unexpected token {tokens[0]!r}")

    line_no, tokens = cur.next_tokens()
    if len(tokens) != 2 or tokens[0] != "Frames:":
        raise BvhParseError(line_no, "expected 'Frames: <count>'")
    try:
        declared = int(tokens[1])
    except ValueError:
        raise BvhParseError(line_no, "non-numeric frame count") from None
    frames_line = line_no
    line_no, tokens = cur.next_tokens()
    if len(tokens) != 3 or tokens[0] != "Frame" or tokens[1] != "Time:":
        raise BvhParseError(line_no, "expected 'Frame Time: <seconds>'")
    try:
        frame_time = float(tokens[2])
    except ValueError:
        raise BvhParseError(line_no, "non-numeric frame time") from None

    width = sum(len(c) for c in channels)
    rows: list[list[float]] = []
    while True:
        line_no, tokens = cur.next_tokens()
        if not tokens:
            break
        try:
            row = [float(v) for v in tokens]
        except ValueError:
            raise BvhParseError(line_no, "non-numeric frame data") from None
        if len(row) != width:
            raise BvhParseError(
                line_no, f"frame has {len(row)} values, hierarchy declares {width} channels"
            )
        rows.append(row)
    if len(rows) != declared:
        raise BvhParseError(
            frames_line, f"declared {declared} frames but found {len(rows)} data rows"
        )
    if declared < 1:
        raise BvhParseError(frames_line, "motion must contain at least one frame")

    data = np.asarray(rows, dtype=np.float64)
    num_joints = len(names)
    rotations = np.zeros((declared, num_joints, 3))
    root_positions = np.zeros((declared, 3))

    col = 0
    for j in range(num_joints):
        chan = channels[j]
        rot_cols: list[tuple[str, int]] = []
        for c in chan:
            if c in _POS_CHANNELS:
                if j == 0:
                    root_positions[:, _POS_CHANNELS.index(c)] = data[:, col]
            else:
                rot_cols.append((c, col))
            col += 1
        if not rot_cols:
            continue
        order = tuple(c for c, _ in rot_cols)
        values = np.radians(data[:, [i for _, i in rot_cols]])
        if order == _ROT_CHANNELS:
            rotations[:, j, :] = values
        else:
            m = None
            for k, (c, _) in enumerate(rot_cols):
                r = _axis_rotation(c, values[:, k])
                m = r if m is None else m @ r
            rotations[:, j, :] = matrix_to_euler_zxy(m)

    foot = [
        i for i, n in enumerate(names) if any(h in n.lower() for h in _FOOT_NAME_HINTS)
    ]
    skeleton = SkeletonDef(
        joint_names=names,
        parent_index=parents,
        offsets=np.asarray(offsets, dtype=np.float64),
        foot_joint_indices=foot,
    )
    return skeleton, RawMotion(
        root_positions=root_positions, rotations=rotations, frame_time=frame_time
    )


def clip_from_frames(
    skeleton: SkeletonDef,
    raw: RawMotion,
    height_thresh: float | None = None,
    speed_thresh: float | None = None,
    compute_contacts: bool = True,
) -> MotionClip:
    """Decompose raw frames into the clip representation.

    The root rotation is split into an integrated heading (stored as yaw rate)
    and a residual lean; translation becomes heading-local planar velocity plus
    height. Foot contacts are computed from forward kinematics when thresholds
    are given (and the skeleton names foot joints), else left at zero.
    """
    from .kinematics import DEFAULT_HEIGHT_THRESH, DEFAULT_SPEED_THRESH, detect_foot_contacts, forward_kinematics

    rot = np.asarray(raw.rotations, dtype=np.float64).copy()
    pos = np.asarray(raw.root_positions, dtype=np.float64)
    f = rot.shape[0]

    root_mats = euler_zxy_to_matrix(rot[:, 0, :])
    heading, residual = split_heading(root_mats)
    rot[:, 0, :] = matrix_to_euler_zxy(residual)

    root = np.zeros((f, 4))
    root[:, 2] = pos[:, 1]
    if f > 1:
        delta = pos[1:] - pos[:-1]
        inv = np.swapaxes(rot_y(heading[:-1]), -1, -2)
        local = np.einsum("fab,fb->fa", inv, delta)
        root[:-1, 0] = local[:, 0]
        root[:-1, 1] = local[:, 2]
        dpsi = np.diff(heading)
        root[:-1, 3] = np.arctan2(np.sin(dpsi), np.cos(dpsi))
        root[-1, [0, 1, 3]] = root[-2, [0, 1, 3]]

    clip = MotionClip(
        rotations=rot,
        root=root,
        foot_contact=np.zeros((f, skeleton.num_feet), dtype=np.float32),
    )
    if skeleton.num_feet and compute_contacts:
        ht = DEFAULT_HEIGHT_THRESH if height_thresh is None else height_thresh
        st = DEFAULT_SPEED_THRESH if speed_thresh is None else speed_thresh
        positions = forward_kinematics(skeleton, clip)
        clip.foot_contact = detect_foot_contacts(
            positions[:, skeleton.foot_joint_indices], ht, st
        )
    return clip


def serialize_bvh(
    skeleton: SkeletonDef, clip: MotionClip, frame_time: float = DEFAULT_FRAME_TIME
) -> str:
    """Emit BVH text for a clip; inverse of parse + decompose.

    Root translation is integrated from the trajectory channels starting at the
    origin, the root rotation recomposed as heading followed by residual lean.
    """
    if clip.num_joints != skeleton.num_joints:
        raise ValueError(
            f"clip has {clip.num_joints} joints, skeleton has {skeleton.num_joints}"
        )
    children: list[list[int]] = [[] for _ in skeleton.joint_names]
    root_index = 0
    for i, p in enumerate(skeleton.parent_index):
        if p == -1:
            root_index = i
        else:
            children[p].append(i)

    out: list[str] = ["HIERARCHY"]
    dfs_order: list[int] = []

    def emit(joint: int, depth: int):
        dfs_order.append(joint)
        pad = "  " * depth
        kind = "ROOT" if skeleton.parent_index[joint] == -1 else "JOINT"
        out.append(f"{pad}{kind} {skeleton.joint_names[joint]}")
        out.append(f"{pad}{{")
        ox, oy, oz = skeleton.offsets[joint]
        out.append(f"{pad}  OFFSET {ox:.6f} {oy:.6f} {oz:.6f}")
        if kind == "ROOT":
            out.append(
                f"{pad}  CHANNELS 6 Xposition Yposition Zposition "
                "Zrotation Xrotation Yrotation"
            )
        else:
            out.append(f"{pad}  CHANNELS 3 Zrotation Xrotation Yrotation")
        if children[joint]:
            for c in children[joint]:
                emit(c, depth + 1)
        else:
            out.append(f"{pad}  End Site")
            out.append(f"{pad}  {{")
            out.append(f"{pad}    OFFSET 0.000000 0.000000 0.000000")
            out.append(f"{pad}  }}")
        out.append(f"{pad}}}")

    emit(root_index, 0)

    pos, heading = integrate_root(clip.root)
    residual = euler_zxy_to_matrix(np.asarray(clip.rotations[:, 0, :], dtype=np.float64))
    root_euler = matrix_to_euler_zxy(rot_y(heading) @ residual)

    out.append("MOTION")
    out.append(f"Frames: {clip.num_frames}")
    out.append(f"Frame Time: {frame_time:.8f}")
    deg = np.degrees
    for f in range(clip.num_frames):
        vals = [pos[f, 0], pos[f, 1], pos[f, 2], *deg(root_euler[f])]
        for j in dfs_order:
            if j == root_index:
                continue
            vals.extend(deg(np.asarray(clip.rotations[f, j], dtype=np.float64)))
        out.append(" ".join(f"{v:.6f}" for v in vals))
    return "\n".join(out) + "\n"
