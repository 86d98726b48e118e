import numpy as np
import pytest

from motiondiff.errors import DataError
from motiondiff.motiondata import (
    MotionDataset,
    RawMotion,
    compute_stats,
    content_names,
    default_skeleton,
    denormalize_clip,
    generate_synthetic,
    normalize_clips,
    parse_bvh,
    serialize_bvh,
    style_names,
    window_and_normalize,
    window_clips,
)


def _long_raw(frames=64):
    """A raw motion stream of the requested length built from a synthetic clip."""
    skeleton = default_skeleton()
    clip = generate_synthetic(1, 1, 1, seed=40)[0]
    skel, raw0 = parse_bvh(serialize_bvh(skeleton, clip))
    reps = (frames + 31) // 32
    rot = np.tile(raw0.rotations, (reps, 1, 1))[:frames]
    pos = np.cumsum(np.full((frames, 3), [0.0, 0.0, 0.01]), axis=0)
    pos[:, 1] = 0.86
    return skel, RawMotion(root_positions=pos, rotations=rot, frame_time=1 / 30)


class TestWindowing:
    def test_64_frames_stride_32_gives_2_windows(self):
        skel, raw = _long_raw(64)
        windows = window_clips(raw, skel, stride=32)
        assert len(windows) == 2

    def test_stride_16_overlap(self):
        skel, raw = _long_raw(64)
        assert len(window_clips(raw, skel, stride=16)) == 3

    def test_windowing_conservation(self):
        skel, raw = _long_raw(70)
        windows = window_clips(raw, skel, stride=32)
        joined = np.concatenate([w.rotations for w in windows])
        direct = window_clips(raw, skel, stride=32)
        # same frames, same decomposition: stride-32 windows tile the stream
        assert joined.shape[0] == 64
        for k, w in enumerate(windows):
            ref = raw.rotations[32 * k : 32 * (k + 1)]
            assert np.abs(w.rotations[:, 1:] - ref[:, 1:].astype(np.float32)).max() < 1e-6

    def test_too_short_input_raises(self):
        skel, raw = _long_raw(64)
        short = RawMotion(
            root_positions=raw.root_positions[:20],
            rotations=raw.rotations[:20],
            frame_time=raw.frame_time,
        )
        with pytest.raises(DataError):
            window_clips(short, skel)


class TestNormalization:
    def test_normalized_set_has_zero_mean_unit_std(self):
        clips = generate_synthetic(30, 3, 3, seed=31)
        normed, stats = normalize_clips(clips)
        rot = np.concatenate([c.rotations for c in normed], axis=0)
        root = np.concatenate([c.root for c in normed], axis=0)
        assert np.abs(rot.mean(axis=0)).max() < 1e-5
        assert np.abs(root.mean(axis=0)).max() < 1e-5
        live = stats.rot_std.reshape(-1) > 1e-5
        assert np.abs(rot.std(axis=0).reshape(-1)[live] - 1.0).max() < 1e-3

    def test_stored_stats_reproduce_fresh_output(self):
        clips = generate_synthetic(12, 3, 3, seed=32)
        fresh, stats = normalize_clips(clips)
        again, _ = normalize_clips(clips, stats)
        for a, b in zip(fresh, again):
            assert np.array_equal(a.rotations, b.rotations)
            assert np.array_equal(a.root, b.root)

    def test_denormalize_inverts(self):
        clips = generate_synthetic(6, 3, 2, seed=33)
        normed, stats = normalize_clips(clips)
        for raw, n in zip(clips, normed):
            back = denormalize_clip(n, stats)
            assert np.abs(back.rotations - raw.rotations).max() < 1e-5
            assert np.abs(back.root - raw.root).max() < 1e-5

    def test_window_and_normalize_end_to_end(self):
        skel, raw = _long_raw(96)
        windows, stats = window_and_normalize(raw, skel, stride=32)
        assert len(windows) == 3
        rot = np.concatenate([w.rotations for w in windows], axis=0)
        assert np.abs(rot.mean(axis=0)).max() < 1e-5

    def test_std_floor(self):
        clips = generate_synthetic(4, 1, 1, seed=34)
        _, stats = normalize_clips(clips)
        assert stats.rot_std.min() >= 1e-6
        assert stats.root_std.min() >= 1e-6


class TestContainer:
    def _dataset(self, n=12):
        clips = generate_synthetic(n, 3, 3, seed=35)
        normed, stats = normalize_clips(clips)
        return MotionDataset(
            clips=normed,
            stats=stats,
            skeleton=default_skeleton(),
            content_names=content_names(3),
            style_names=style_names(3),
        )

    def test_save_load_roundtrip(self, tmp_path):
        ds = self._dataset()
        path = tmp_path / "data.bin"
        ds.save(path)
        loaded = MotionDataset.load(path)
        assert len(loaded) == len(ds)
        for a, b in zip(ds.clips, loaded.clips):
            assert np.array_equal(a.rotations, b.rotations)
            assert np.array_equal(a.root, b.root)
            assert np.array_equal(a.foot_contact, b.foot_contact)
            assert (a.content, a.style) == (b.content, b.style)
        assert loaded.content_names == ds.content_names
        assert np.array_equal(loaded.stats.rot_mean, ds.stats.rot_mean)
        assert loaded.skeleton.joint_names == ds.skeleton.joint_names

    def test_save_is_deterministic(self, tmp_path):
        ds = self._dataset()
        ds.save(tmp_path / "a.bin")
        ds.save(tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert (tmp_path / "a.bin.json").read_bytes() == (tmp_path / "b.bin.json").read_bytes()

    def test_magic_and_corruption_checks(self, tmp_path):
        ds = self._dataset()
        path = tmp_path / "data.bin"
        ds.save(path)
        blob = path.read_bytes()
        (tmp_path / "bad.bin").write_bytes(b"XXXX" + blob[4:])
        (tmp_path / "bad.bin.json").write_bytes((tmp_path / "data.bin.json").read_bytes())
        with pytest.raises(DataError):
            MotionDataset.load(tmp_path / "bad.bin")
        (tmp_path / "trunc.bin").write_bytes(blob[:-40])
        (tmp_path / "trunc.bin.json").write_bytes((tmp_path / "data.bin.json").read_bytes())
        with pytest.raises(DataError):
            MotionDataset.load(tmp_path / "trunc.bin")
        with pytest.raises(DataError):
            MotionDataset.load(tmp_path / "missing.bin")

    def test_split_is_disjoint_and_stable(self):
        ds = self._dataset(60)
        train, held = ds.train_indices(), ds.heldout_indices()
        assert sorted(train + held) == list(range(60))
        assert ds.train_indices() == train
        # labels must appear on both sides of the split
        held_contents = {ds.clips[i].content for i in held}
        assert held_contents == {0, 1, 2}
