import logging

import numpy as np
import pytest

from svpe import datasets as ds
from svpe.errors import DimensionError


def make_videos(root, n, n_frames, size=12, seed=0):
    rng = np.random.default_rng(seed)
    dirs = []
    for v in range(n):
        d = root / f"video{v:02d}"
        d.mkdir()
        for t in range(n_frames):
            ds.write_frame(d / f"frame_{t}.png", rng.random((size, size)), bits=8)
        dirs.append(d)
    return dirs


def test_ten_videos_eighty_segments(tmp_path):
    dirs = make_videos(tmp_path, 10, 20)
    train, test = ds.segment_videos(dirs, ds.SegmentSpec(crop=8), seed=1)
    assert len(train) + len(test) == 80
    assert len(train) == 64
    assert {s.video for s in train}.isdisjoint({s.video for s in test})
    for s in train + test:
        assert s.frames.shape == (8, 8, 8)
        assert s.frames.min() >= 0 and s.frames.max() <= 1
    starts = [s.start for s in train if s.video == train[0].video]
    assert len(set(starts)) == 8  # without replacement


def test_exact_length_video(tmp_path):
    dirs = make_videos(tmp_path, 1, 8)
    train, test = ds.segment_videos(dirs, ds.SegmentSpec(crop=None), seed=0, split=1.0)
    assert len(train) == 8 and not test
    assert all(np.array_equal(s.frames, train[0].frames) for s in train)


def test_short_video_skipped(tmp_path, caplog):
    dirs = make_videos(tmp_path, 2, 5)
    with caplog.at_level(logging.WARNING):
        train, test = ds.segment_videos(dirs, ds.SegmentSpec(crop=None), seed=0)
    assert train == [] and test == []
    assert "skipping" in caplog.text


def test_segmenting_deterministic(tmp_path):
    dirs = make_videos(tmp_path, 4, 15)
    a = ds.segment_videos(dirs, ds.SegmentSpec(crop=None), seed=3)
    b = ds.segment_videos(dirs, ds.SegmentSpec(crop=None), seed=3)
    for x, y in zip(a[0] + a[1], b[0] + b[1]):
        assert (x.video, x.start, x.seed) == (y.video, y.start, y.seed)
        assert np.array_equal(x.frames, y.frames)


def test_frame_order_is_numeric(tmp_path):
    d = tmp_path / "v"
    d.mkdir()
    for t in (10, 2, 1):
        ds.write_frame(d / f"f{t}.png", np.full((2, 2), t / 10), bits=8)
    assert [p.stem for p in ds.list_frames(d)] == ["f1", "f2", "f10"]


def test_frame_io_16bit(tmp_path):
    f = np.random.default_rng(0).random((5, 7))
    ds.write_frame(tmp_path / "x.png", f, bits=16)
    assert np.abs(ds.read_frame(tmp_path / "x.png") - f).max() <= 0.5 / 65535 + 1e-12


def test_crop_too_small():
    with pytest.raises(DimensionError):
        ds.center_crop(np.zeros((8, 4, 4)), 6)


def test_augment_identity_and_involution():
    f = np.random.default_rng(1).random((8, 6, 6))
    assert np.array_equal(ds.apply_ops(f, False, False, 0), f)
    once = ds.apply_ops(f, True, False, 0)
    assert np.array_equal(ds.apply_ops(once, True, False, 0), f)
    once = ds.apply_ops(f, False, True, 0)
    assert np.array_equal(ds.apply_ops(once, False, True, 0), f)


def test_augment_consistent_across_frames():
    f = np.random.default_rng(2).random((8, 6, 6))
    g = ds.apply_ops(f, True, False, 1)
    assert np.array_equal(g[3] - g[0], np.rot90((f[3] - f[0])[:, ::-1], 1))


def test_augment_preserves_histogram_and_is_seeded():
    seg = ds.Segment(np.random.default_rng(3).random((8, 5, 5)))
    a, b = ds.augment(seg, 7), ds.augment(seg, 7)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(np.sort(a.frames[2].ravel()), np.sort(seg.frames[2].ravel()))


def test_rotation_needs_square():
    with pytest.raises(DimensionError):
        ds.apply_ops(np.zeros((8, 4, 6)), False, False, 1)
    assert ds.apply_ops(np.zeros((8, 4, 6)), False, False, 2).shape == (8, 4, 6)


def _centroid(img, bg):
    w = np.abs(img - bg)
    r, c = np.indices(img.shape)
    return (w * r).sum() / w.sum(), (w * c).sum() / w.sum()


def test_synthetic_centroid_motion():
    shape = ds.Shape(center=(32.0, 20.0), radius=6.0, intensity=1.0, velocity=(0.0, 2.0))
    spec = ds.SceneSpec(size=64, shapes=(shape,), texture_amplitude=0.0, background_level=0.2)
    f = ds.synth_scene(spec)
    r0, c0 = _centroid(f[0], 0.2)
    r7, c7 = _centroid(f[7], 0.2)
    assert abs((c7 - c0) - 14.0) <= 0.1 and abs(r7 - r0) <= 0.1


def test_static_scene_and_determinism():
    spec = ds.random_scene_spec(5, motion="static")
    f = ds.synth_scene(spec, 5)
    assert all(np.array_equal(f[0], f[t]) for t in range(8))
    moving = ds.random_scene_spec(6, motion="global")
    assert np.array_equal(ds.synth_scene(moving, 6), ds.synth_scene(moving, 6))


def test_synth_dataset_composition():
    train, test = ds.synth_dataset(6, 3, seed=0, size=32)
    assert len(train) == 6 and len(test) == 3
    for s in train + test:
        assert s.frames.shape == (8, 32, 32)
        assert 0 <= s.frames.min() and s.frames.max() <= 1
    assert np.array_equal(train[0].frames[0], train[0].frames[7])  # first scene is static


def test_write_dataset_and_manifest(tmp_path):
    train, test = ds.synth_dataset(2, 1, seed=0, size=16)
    dirs = ds.write_dataset(tmp_path / "train", train)
    assert len(ds.list_frames(dirs[0])) == 8
    ds.write_manifest(tmp_path / "m.tsv", train, test, 0)
    lines = (tmp_path / "m.tsv").read_text().splitlines()
    assert lines[1] == "split\tvideo\tstart\tseed" and len(lines) == 5
