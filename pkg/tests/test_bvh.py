import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motiondiff.errors import BvhParseError
from motiondiff.motiondata import (
    MotionClip,
    clip_from_frames,
    default_skeleton,
    forward_kinematics,
    generate_synthetic,
    parse_bvh,
    serialize_bvh,
)

MINIMAL = """HIERARCHY
ROOT Hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0.0 1.0 0.0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0.0 0.5 0.0
    }
  }
}
MOTION
Frames: 1
Frame Time: 0.03333333
0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0
"""


class TestParse:
    def test_minimal_two_joints_one_zero_frame(self):
        skel, raw = parse_bvh(MINIMAL)
        assert skel.num_joints == 2
        assert skel.joint_names == ["Hips", "Spine"]
        assert skel.parent_index == [-1, 0]
        assert raw.num_frames == 1
        assert np.allclose(raw.rotations, 0.0)
        assert np.allclose(raw.root_positions, 0.0)

    def test_frame_count_mismatch_reported(self):
        text = MINIMAL.replace("Frames: 1", "Frames: 10")
        with pytest.raises(BvhParseError) as e:
            parse_bvh(text)
        assert "10" in str(e.value) and "1" in str(e.value)

    def test_non_numeric_frame_data_names_line(self):
        bad = MINIMAL.replace("0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0", "0.0 zero 0 0 0 0 0 0 0")
        with pytest.raises(BvhParseError) as e:
            parse_bvh(bad)
        assert e.value.line == MINIMAL.strip().count("\n") + 1

    def test_channel_width_mismatch(self):
        bad = MINIMAL.replace("0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0", "0.0 0.0 0.0")
        with pytest.raises(BvhParseError):
            parse_bvh(bad)

    def test_malformed_hierarchy(self):
        with pytest.raises(BvhParseError):
            parse_bvh("MOTION\nFrames: 0\nFrame Time: 0.03\n")
        with pytest.raises(BvhParseError):
            parse_bvh(MINIMAL.replace("CHANNELS 3", "CHANNELS 4"))
        with pytest.raises(BvhParseError):
            parse_bvh(MINIMAL.replace("OFFSET 0.0 1.0 0.0", "OFFSET 0.0 1.0"))

    def test_alternate_rotation_order_converted(self):
        text = MINIMAL.replace(
            "CHANNELS 3 Zrotation Xrotation Yrotation",
            "CHANNELS 3 Xrotation Yrotation Zrotation",
        ).replace(
            "0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0",
            "0.0 0.0 0.0 0.0 0.0 0.0 30.0 0.0 0.0",
        )
        _, raw = parse_bvh(text)
        # Xrotation 30 degrees maps onto the canonical (Z, X, Y) channels
        assert raw.rotations[0, 1, 1] == pytest.approx(np.radians(30.0), abs=1e-12)


class TestRoundTrip:
    def test_parse_serialize_parse_identical(self):
        skeleton = default_skeleton()
        clip = generate_synthetic(3, 3, 3, seed=21)[1]
        text = serialize_bvh(skeleton, clip)
        skel2, raw2 = parse_bvh(text)
        clip2 = clip_from_frames(skel2, raw2)
        text2 = serialize_bvh(skel2, clip2)
        skel3, raw3 = parse_bvh(text2)
        clip3 = clip_from_frames(skel3, raw3)
        rot_err = np.degrees(np.abs(clip3.rotations - clip2.rotations)).max()
        assert rot_err < 1e-4
        assert np.abs(clip3.root - clip2.root).max() < 1e-5
        assert np.array_equal(clip3.foot_contact, clip2.foot_contact)

    def test_zero_rotation_clip_positions_equal_rest_offsets(self):
        skeleton = default_skeleton()
        f = 4
        clip = MotionClip(
            rotations=np.zeros((f, skeleton.num_joints, 3)),
            root=np.zeros((f, 4)),
            foot_contact=np.zeros((f, 2)),
        )
        skel2, raw2 = parse_bvh(serialize_bvh(skeleton, clip))
        clip2 = clip_from_frames(skel2, raw2, compute_contacts=False)
        pos = forward_kinematics(skel2, clip2)
        rest = np.zeros((skeleton.num_joints, 3))
        for i, p in enumerate(skeleton.parent_index):
            rest[i] = skeleton.offsets[i] + (rest[p] if p >= 0 else 0.0)
        for frame in range(f):
            assert np.abs(pos[frame] - rest).max() < 1e-6

    def test_generated_clip_header_says_32_frames(self):
        skeleton = default_skeleton()
        clip = generate_synthetic(1, 1, 1, seed=3)[0]
        text = serialize_bvh(skeleton, clip)
        assert "Frames: 32" in text

    def test_joint_count_mismatch_rejected(self):
        skeleton = default_skeleton()
        clip = MotionClip(
            rotations=np.zeros((2, 3, 3)),
            root=np.zeros((2, 4)),
            foot_contact=np.zeros((2, 1)),
        )
        with pytest.raises(ValueError):
            serialize_bvh(skeleton, clip)


@settings(max_examples=60, deadline=None)
@given(
    mode=st.sampled_from(["truncate", "delete_line", "mangle_token"]),
    pos=st.integers(min_value=0, max_value=10_000),
)
def test_parser_totality_under_corruption(mode, pos):
    """Corrupted input either raises BvhParseError or yields a valid skeleton."""
    skeleton = default_skeleton()
    clip = generate_synthetic(1, 1, 1, seed=5)[0]
    text = serialize_bvh(skeleton, clip)
    if mode == "truncate":
        text = text[: pos % max(1, len(text))]
    elif mode == "delete_line":
        lines = text.splitlines()
        del lines[pos % len(lines)]
        text = "\n".join(lines)
    else:
        tokens = text.split(" ")
        tokens[pos % len(tokens)] = "???"
        text = " ".join(tokens)
    try:
        skel, raw = parse_bvh(text)
    except BvhParseError:
        return
    assert skel.num_joints >= 1
    assert sum(1 for p in skel.parent_index if p == -1) == 1
    for i, p in enumerate(skel.parent_index):
        assert p == -1 or 0 <= p < i
    assert raw.rotations.shape[1] == skel.num_joints
