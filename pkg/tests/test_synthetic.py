import numpy as np
import pytest

from motiondiff.motiondata import (
    WINDOW_LEN,
    content_names,
    default_skeleton,
    detect_foot_contacts,
    forward_kinematics,
    generate_synthetic,
    style_names,
)
from motiondiff.motiondata.kinematics import DEFAULT_HEIGHT_THRESH, DEFAULT_SPEED_THRESH


class TestGenerateSynthetic:
    def test_same_seed_bit_identical(self):
        a = generate_synthetic(12, 3, 3, seed=42)
        b = generate_synthetic(12, 3, 3, seed=42)
        for x, y in zip(a, b):
            assert np.array_equal(x.rotations, y.rotations)
            assert np.array_equal(x.root, y.root)
            assert np.array_equal(x.foot_contact, y.foot_contact)
            assert (x.content, x.style) == (y.content, y.style)

    def test_different_seed_differs(self):
        a = generate_synthetic(3, 3, 3, seed=1)
        b = generate_synthetic(3, 3, 3, seed=2)
        assert not np.array_equal(a[0].rotations, b[0].rotations)

    def test_every_clip_has_window_length(self):
        for clip in generate_synthetic(9, 3, 3, seed=0):
            assert clip.num_frames == WINDOW_LEN == 32

    def test_walk_vs_run_root_speed_ratio(self):
        clips = generate_synthetic(60, 3, 3, seed=13)
        speed = lambda c: float(np.linalg.norm(c.root[:, :2], axis=1).mean())
        walk = np.mean([speed(c) for c in clips if c.content == 0])
        run = np.mean([speed(c) for c in clips if c.content == 1])
        assert run / walk >= 1.5

    def test_labels_cycle_evenly(self):
        clips = generate_synthetic(18, 3, 3, seed=0)
        contents = [c.content for c in clips]
        styles = [c.style for c in clips]
        assert contents == [0, 1, 2] * 6
        assert styles == [0] * 3 + [1] * 3 + [2] * 3 + [0] * 3 + [1] * 3 + [2] * 3

    def test_contacts_binary_and_plausible(self):
        for clip in generate_synthetic(9, 3, 3, seed=3):
            assert set(np.unique(clip.foot_contact)) <= {0.0, 1.0}
            assert 0.2 <= clip.foot_contact.mean() <= 0.8

    def test_analytic_contacts_match_detection(self):
        skeleton = default_skeleton()
        clips = generate_synthetic(9, 3, 3, seed=23)
        agreements = []
        for clip in clips:
            pos = forward_kinematics(skeleton, clip)
            det = detect_foot_contacts(
                pos[:, skeleton.foot_joint_indices],
                DEFAULT_HEIGHT_THRESH,
                DEFAULT_SPEED_THRESH,
            )
            agreements.append((det == clip.foot_contact).mean())
        assert np.mean(agreements) > 0.9

    def test_extra_classes_supported(self):
        clips = generate_synthetic(12, 6, 8, seed=4)
        assert max(c.content for c in clips) == 5
        assert len(content_names(6)) == len(set(content_names(6))) == 6
        assert len(style_names(8)) == len(set(style_names(8))) == 8

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 0, 3)
        with pytest.raises(ValueError):
            generate_synthetic(-1, 3, 3)

    def test_styles_change_amplitude(self):
        clips = generate_synthetic(90, 1, 3, seed=8)
        # shoulder swing amplitude: vigorous > neutral > stooped
        amp = lambda s: np.mean(
            [c.rotations[:, 5, 1].std() for c in clips if c.style == s]
        )
        assert amp(1) > amp(0) > amp(2)
