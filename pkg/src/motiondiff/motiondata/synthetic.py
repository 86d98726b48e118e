"""Procedural gait generator for hermetic, reproducible datasets.

Content classes control the gait structure (cycle length, stance fraction,
root speed, step lift) while style classes modulate amplitude, tempo and
posture. Legs are posed by analytic two-bone IK toward foot targets that stay
pinned to the ground during stance, so contact labels are exact by
construction and agree with threshold-based detection on the FK output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import euler_zxy_to_matrix, integrate_root, rot_y, two_bone_ik
from .types import WINDOW_LEN, MotionClip, SkeletonDef, default_skeleton

__all__ = ["generate_synthetic", "content_names", "style_names"]

_STANCE_Y = 0.02  # ankle height while planted

# joint indices in the default skeleton
_SPINE, _CHEST, _NECK, _HEAD = 1, 2, 3, 4
_L_SHOULDER, _L_ELBOW = 5, 6
_R_SHOULDER, _R_ELBOW = 8, 9
_LEGS = ((11, 12, 13, 0.10), (14, 15, 16, -0.10))  # hip, knee, ankle, lateral
_NOISE_JOINTS = (0, _SPINE, _CHEST, _NECK, _HEAD, _L_SHOULDER, _L_ELBOW, 7, _R_SHOULDER, _R_ELBOW, 10)


@dataclass(frozen=True)
class _Gait:
    period: float  # frames per cycle
    duty: float  # stance fraction of the cycle
    speed: float  # forward units per frame
    lift: float  # swing foot apex height
    bounce: float  # root height oscillation (crouch depth for hops)
    lean: float  # forward body lean, radians
    arm: float  # arm swing amplitude, radians
    height: float  # base root height
    in_phase: bool  # both feet share one phase (hopping)


_BASE_GAITS = (
    _Gait(period=32.0, duty=0.60, speed=0.030, lift=0.08, bounce=0.015,
          lean=0.02, arm=0.45, height=0.84, in_phase=False),
    _Gait(period=16.0, duty=0.40, speed=0.075, lift=0.14, bounce=0.022,
          lean=0.14, arm=0.80, height=0.84, in_phase=False),
    _Gait(period=20.0, duty=0.55, speed=0.012, lift=0.26, bounce=0.14,
          lean=0.05, arm=0.90, height=0.88, in_phase=True),
)
_BASE_GAIT_NAMES = ("walk", "run", "hop")

# (amplitude, speed factor, forward posture, arm factor)
_BASE_STYLES = (
    (1.00, 1.00, 0.00, 1.00),
    (1.35, 1.00, -0.06, 1.50),
    (0.70, 0.80, 0.35, 0.55),
)
_BASE_STYLE_NAMES = ("neutral", "vigorous", "stooped")


def content_names(n: int) -> list[str]:
    base = len(_BASE_GAITS)
    return [_BASE_GAIT_NAMES[c % base] + ("" if c < base else str(c // base + 1)) for c in range(n)]


def style_names(n: int) -> list[str]:
    base = len(_BASE_STYLES)
    return [_BASE_STYLE_NAMES[s % base] + ("" if s < base else str(s // base + 1)) for s in range(n)]


def _gait_for(content: int) -> _Gait:
    base = _BASE_GAITS[content % len(_BASE_GAITS)]
    v = content // len(_BASE_GAITS)
    if v == 0:
        return base
    return _Gait(
        period=base.period,
        duty=base.duty,
        speed=base.speed * (1.0 + 0.15 * v),
        lift=base.lift * (1.0 + 0.2 * v),
        bounce=base.bounce,
        lean=base.lean + 0.04 * v,
        arm=base.arm,
        height=base.height,
        in_phase=base.in_phase,
    )


def _style_for(style: int) -> tuple[float, float, float, float]:
    amp, speed, posture, arm = _BASE_STYLES[style % len(_BASE_STYLES)]
    v = style // len(_BASE_STYLES)
    if v:
        amp = amp * (1.0 - 0.10 * v)
        posture = posture + 0.06 * v
    return amp, speed, posture, arm


def _path_sampler(root: np.ndarray, pad: int):
    """Continuous (position, heading) lookup along the integrated root path.

    The channels are edge-padded by ``pad`` frames on both sides so foot plants
    slightly outside the window stay well defined.
    """
    ext = np.concatenate([np.repeat(root[:1], pad, axis=0), root, np.repeat(root[-1:], pad, axis=0)])
    pos, heading = integrate_root(ext)
    pos = pos - pos[pad]
    heading = heading - heading[pad]

    def sample(g: float) -> tuple[np.ndarray, float]:
        a = min(max(g + pad, 0.0), len(ext) - 1.000001)
        i = int(np.floor(a))
        u = a - i
        return pos[i] * (1 - u) + pos[i + 1] * u, heading[i] * (1 - u) + heading[i + 1] * u

    return sample


def _smooth_noise(rng: np.random.Generator, frames: int, scale: float) -> np.ndarray:
    amp = np.abs(rng.normal(0.0, scale))
    k = rng.integers(1, 4)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return amp * np.sin(2.0 * np.pi * k * np.arange(frames) / frames + phase)


def _generate_clip(
    skeleton: SkeletonDef, content: int, style: int, rng: np.random.Generator
) -> MotionClip:
    gait = _gait_for(content)
    amp_s, speed_s, posture, arm_s = _style_for(style)
    f = WINDOW_LEN

    period = gait.period
    speed = gait.speed * speed_s * rng.uniform(0.92, 1.08)
    amp = amp_s * rng.uniform(0.92, 1.08)
    phase0 = rng.uniform(0.0, period)
    lean = gait.lean + posture * 0.4

    frames = np.arange(f)
    theta = (frames + phase0) / period

    root = np.zeros((f, 4), dtype=np.float64)
    root[:, 0] = 0.004 * amp * np.sin(2 * np.pi * theta + rng.uniform(0, 2 * np.pi))
    root[:, 1] = speed * (1.0 + 0.04 * np.sin(2 * np.pi * theta + rng.uniform(0, 2 * np.pi)))
    root[:, 3] = rng.uniform(-0.002, 0.002)

    if gait.in_phase:
        u = theta - np.floor(theta)
        ground = u < gait.duty
        crouch = np.sin(np.pi * np.clip(u / gait.duty, 0.0, 1.0))
        rise = np.sin(np.pi * np.clip((u - gait.duty) / (1 - gait.duty), 0.0, 1.0))
        root[:, 2] = gait.height - gait.bounce * amp * np.where(ground, crouch, 0.0) \
            + 0.10 * amp * np.where(ground, 0.0, rise)
    else:
        root[:, 2] = gait.height + gait.bounce * amp * np.sin(4 * np.pi * theta)

    rotations = np.zeros((f, skeleton.num_joints, 3), dtype=np.float64)

    # torso, head, root lean
    rotations[:, 0, 1] = lean * 0.3 + _smooth_noise(rng, f, 0.01)
    rotations[:, 0, 0] = _smooth_noise(rng, f, 0.008)
    rotations[:, _SPINE, 1] = lean * 0.6 + posture * 0.3 + _smooth_noise(rng, f, 0.012)
    rotations[:, _CHEST, 1] = lean * 0.4 + posture * 0.25 + _smooth_noise(rng, f, 0.012)
    rotations[:, _NECK, 1] = -0.3 * posture + _smooth_noise(rng, f, 0.01)
    rotations[:, _HEAD, 1] = -0.2 * posture + _smooth_noise(rng, f, 0.01)

    # arm swing: antiphase with the same-side leg, or a raise for hops
    swing = np.sin(2 * np.pi * theta)
    if gait.in_phase:
        u = theta - np.floor(theta)
        envelope = np.where(u < gait.duty, np.sin(np.pi * u / gait.duty) * 0.4,
                            np.sin(np.pi * (u - gait.duty) / (1 - gait.duty)))
        arm_l = arm_r = -gait.arm * arm_s * amp * envelope
    else:
        arm_l = -gait.arm * arm_s * amp * swing
        arm_r = gait.arm * arm_s * amp * swing
    rotations[:, _L_SHOULDER, 1] = arm_l + _smooth_noise(rng, f, 0.015)
    rotations[:, _R_SHOULDER, 1] = arm_r + _smooth_noise(rng, f, 0.015)
    rotations[:, _L_ELBOW, 1] = 0.35 + 0.2 * amp * np.abs(swing) + _smooth_noise(rng, f, 0.015)
    rotations[:, _R_ELBOW, 1] = 0.35 + 0.2 * amp * np.abs(swing) + _smooth_noise(rng, f, 0.015)
    rotations[:, 7, 1] = _smooth_noise(rng, f, 0.01)
    rotations[:, 10, 1] = _smooth_noise(rng, f, 0.01)

    path = _path_sampler(root, pad=2 * int(np.ceil(period)))
    root_pos, heading = integrate_root(root)
    root_world = rot_y(heading) @ euler_zxy_to_matrix(rotations[:, 0, :])

    contacts = np.zeros((f, len(_LEGS)), dtype=np.float32)

    for leg, (hip_j, knee_j, ankle_j, lateral) in enumerate(_LEGS):
        side_off = 0.0 if gait.in_phase or leg == 0 else 0.5

        def plant(n: int) -> np.ndarray:
            g = (n + gait.duty / 2 - side_off) * period - phase0
            p, psi = path(g)
            world = p + rot_y(psi) @ np.array([lateral, 0.0, 0.0])
            world[1] = _STANCE_Y
            return world

        l1 = float(np.linalg.norm(skeleton.offsets[knee_j]))
        l2 = float(np.linalg.norm(skeleton.offsets[ankle_j]))
        for k in range(f):
            th = theta[k] + side_off
            n = int(np.floor(th))
            u = th - n
            if u < gait.duty:
                target = plant(n)
                contacts[k, leg] = 1.0
            else:
                usw = (u - gait.duty) / (1.0 - gait.duty)
                target = plant(n) * (1 - usw) + plant(n + 1) * usw
                target[1] = _STANCE_Y + gait.lift * amp * np.sin(np.pi * usw)
            hip_pos = root_pos[k] + root_world[k] @ skeleton.offsets[hip_j]
            pole = root_world[k] @ np.array([0.0, 0.0, 1.0])
            hip_e, knee_e, _ = two_bone_ik(hip_pos, root_world[k], target, pole, l1, l2)
            rotations[k, hip_j] = hip_e
            rotations[k, knee_j] = knee_e

    return MotionClip(
        rotations=rotations,
        root=root,
        foot_contact=contacts,
        content=content,
        style=style,
    )


def generate_synthetic(
    num_clips: int,
    content_classes: int = 3,
    style_classes: int = 3,
    seed: int = 0,
    skeleton: SkeletonDef | None = None,
) -> list[MotionClip]:
    """Generate ``num_clips`` procedural 32-frame clips, labels cycling evenly.

    Deterministic: the same arguments always produce bit-identical clips.
    """
    if content_classes < 1 or style_classes < 1:
        raise ValueError("need at least one content and one style class")
    if num_clips < 0:
        raise ValueError("num_clips must be non-negative")
    skeleton = skeleton or default_skeleton()
    rng = np.random.default_rng(seed)
    clips = []
    for i in range(num_clips):
        content = i % content_classes
        style = (i // content_classes) % style_classes
        clips.append(_generate_clip(skeleton, content, style, rng))
    return clips
